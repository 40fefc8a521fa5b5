// SPDX-License-Identifier: Apache-2.0
#include "crpl/lemma.hpp"

#include <algorithm>
#include <cmath>

#include "crpl/random.hpp"
#include "crpl/transport.hpp"

namespace crpl {

namespace {

constexpr std::uint64_t kLemmaStream = 0x6c656d00;  // "lem"

struct Shape {
  std::size_t batch;
  std::size_t classes;
  std::size_t dim;
};

std::vector<Shape> lemma_shapes() {
  std::vector<Shape> out;
  for (std::size_t b : {4, 6, 8, 12})
    for (std::size_t k : {2, 3})
      if (b % k == 0)
        for (std::size_t d : {2, 4, 8}) out.push_back({b, k, d});
  return out;
}

Matrix sphere_points(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m = gaussian_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), 1.0);
  m.rowwise().normalize();
  return m;
}

}  // namespace

LemmaReport verify_lemma(std::size_t instances, std::uint64_t seed, double tolerance) {
  const auto shapes = lemma_shapes();
  LemmaReport report;
  for (std::size_t i = 0; i < instances; ++i) {
    const Shape s = shapes[i % shapes.size()];
    Rng rng = make_rng(seed, kLemmaStream + i);
    const Matrix taus = sphere_points(rng, s.classes, s.dim);
    const Matrix zs = sphere_points(rng, s.batch, s.dim);
    const Vector pi = uniform_weights(s.classes);
    const auto ot = exact_ot(cost_matrix(taus, zs), pi, uniform_weights(s.batch));
    const auto oracle = constrained_clustering_oracle(taus, zs, pi);
    report.cases.push_back({s.batch, s.classes, s.dim, ot.value, oracle.value});
    report.max_abs_gap = std::max(report.max_abs_gap, std::abs(ot.value - oracle.value));
  }
  report.pass = !report.cases.empty() && report.max_abs_gap <= tolerance;
  return report;
}

}  // namespace crpl
