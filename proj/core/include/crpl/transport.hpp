// SPDX-License-Identifier: Apache-2.0
//
// Discrete optimal transport between the text-embedding measure
// sum_k pi_k delta(tau_k) and a batch of visual embeddings, under the
// cosine cost 1 - <tau, z>.
//
// Point sets are passed as matrices whose rows are unit vectors.
#pragma once

#include <cstddef>
#include <vector>

#include "crpl/embedding.hpp"

namespace crpl {

struct TransportPlan {
  Matrix plan;  // K x B, nonnegative
  double value = 0.0;
};

/// c[k][n] = 1 - <tau_k, z_n>, clamped to [0, 2].
Matrix cost_matrix(const Matrix& taus, const Matrix& zs);

Vector uniform_weights(std::size_t n);

/// Exact Kantorovich solution by the transportation (network) simplex.
/// The returned plan is a basic solution: at most K + B - 1 positive cells.
TransportPlan exact_ot(const Matrix& cost, const Vector& a, const Vector& b);

struct SinkhornOptions {
  double epsilon = 0.05;
  int max_iter = 1000;
  double tol = 1e-6;
};

/// Not converging is reported, not thrown: `converged` is false and
/// `marginal_violation` holds the L1 violation that was reached.
struct SinkhornResult {
  TransportPlan plan;  // value is the unregularized cost <plan, cost>
  bool converged = false;
  double marginal_violation = 0.0;
  int iterations = 0;
};

SinkhornResult sinkhorn(const Matrix& cost, const Vector& a, const Vector& b,
                        const SinkhornOptions& options = {});

struct WassersteinOptions {
  std::size_t exact_bound = 512;  // use exact_ot when K * B <= exact_bound
  SinkhornOptions sinkhorn;
};

struct WassersteinResult {
  double value = 0.0;
  TransportPlan plan;
  bool exact = true;
  bool converged = true;
};

/// W(sum_k pi_k delta(tau_k), uniform over zs). An empty `pi` means 1/K.
WassersteinResult wasserstein_loss(const Matrix& taus, const Matrix& zs, const Vector& pi = {},
                                   const WassersteinOptions& options = {});

/// Envelope gradient of sum p[k][n] (1 - tau_k . z_n) with the plan held
/// fixed: row k is -sum_n p[k][n] z_n.
Matrix wasserstein_grad_taus(const TransportPlan& plan, const Matrix& zs);

struct Assignment {
  std::vector<std::size_t> sigma;  // sample index -> class index
};

/// Mean cosine cost of mapping each z_n to tau_sigma(n).
double assignment_cost(const Matrix& taus, const Matrix& zs, const Assignment& assignment);

struct ClusteringResult {
  double value = 0.0;
  Assignment assignment;
};

/// Exhaustive minimum of the mean cost over all assignments whose class
/// cardinalities equal B * pi_k. Guards: cardinalities must be integral and
/// the number of assignments must not exceed 1e7.
ClusteringResult constrained_clustering_oracle(const Matrix& taus, const Matrix& zs,
                                               const Vector& pi);

/// Each z goes to its closest tau; ties go to the smallest index.
Assignment nearest_assignment(const Matrix& taus, const Matrix& zs);

}  // namespace crpl
