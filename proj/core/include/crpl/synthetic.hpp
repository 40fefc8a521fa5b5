// SPDX-License-Identifier: Apache-2.0
//
// Seeded multi-domain benchmark on the unit hypersphere. Class prototypes
// are uniform on the sphere; every domain rotates them by a fixed angle in
// its own random 2-plane and samples z_pre = radius * R mu_k + noise.
#pragma once

#include <cstddef>
#include <cstdint>

#include "crpl/dataset_io.hpp"

namespace crpl {

struct SyntheticSpec {
  std::size_t num_classes = 10;  // K
  std::size_t dim = 64;          // d
  std::size_t n_sources = 3;
  std::size_t samples_per_domain = 500;
  double domain_rotation_deg = 25.0;
  double noise_sigma = 0.8;
  std::uint64_t seed = 7;
  double radius = 10.0;
  std::size_t base_length = 4;
  std::size_t token_dim = 0;   // 0 means d
  std::size_t hidden_dim = 0;  // 0 means d
  double fit_threshold = 95.0;

  /// Throws InvalidArgument unless K >= 2, d >= 4, n_sources >= 1 and
  /// samples_per_domain is a positive multiple of K.
  void validate() const;
};

struct SyntheticBenchmark {
  DatasetBundle data;
  Matrix prototypes;          // K x d, unit rows
  double fit_accuracy = 0.0;  // base-table accuracy on an unrotated held-out domain
};

/// Throws SeedFitFailure when the fitted base table scores below
/// spec.fit_threshold on the unrotated verification domain.
SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec);

/// Rotate x by `radians` inside the plane spanned by orthonormal u, v.
Vector rotate_in_plane(const Vector& x, const Vector& u, const Vector& v, double radians);

}  // namespace crpl
