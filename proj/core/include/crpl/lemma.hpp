// SPDX-License-Identifier: Apache-2.0
//
// Numerical check that, for uniform class masses with integral
// cardinalities, the Kantorovich optimum between the text and visual
// measures equals the best cardinality-constrained hard assignment.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace crpl {

struct LemmaCase {
  std::size_t batch = 0;    // B
  std::size_t classes = 0;  // K, divides B
  std::size_t dim = 0;      // d
  double exact_ot = 0.0;
  double oracle = 0.0;
};

struct LemmaReport {
  std::vector<LemmaCase> cases;
  double max_abs_gap = 0.0;
  bool pass = false;
};

/// Cycles over B in {4, 6, 8, 12}, K in {2, 3} with K | B and d in {2, 4, 8};
/// points are uniform on the sphere.
LemmaReport verify_lemma(std::size_t instances, std::uint64_t seed, double tolerance = 1e-9);

}  // namespace crpl
