// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "crpl/error.hpp"
#include "crpl/transport.hpp"
#include "oracles.hpp"

namespace crpl {
namespace {

using testing::sphere_rows;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no crpl::Error thrown";
  return ErrorCode::InvalidArgument;
}

Vector random_simplex(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v / v.sum();
}

TEST(CostMatrix, Values) {
  Matrix taus(2, 2);
  taus << 1, 0, 0, 1;
  Matrix zs(3, 2);
  zs << 1, 0, 0, 1, -1, 0;
  const Matrix c = cost_matrix(taus, zs);
  Matrix expect(2, 3);
  expect << 0, 1, 2, 1, 0, 1;
  EXPECT_EQ(c, expect);
}

TEST(ExactOt, IdentityCostIsZero) {
  Matrix c = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
  const auto plan = exact_ot(c, uniform_weights(3), uniform_weights(3));
  EXPECT_NEAR(plan.value, 0.0, 1e-15);
  EXPECT_NEAR((plan.plan - Matrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(ExactOt, MatchesVertexEnumeration) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    Matrix c(3, 4);
    for (auto& x : c.reshaped()) x = u(rng);
    const Vector a = random_simplex(rng, 3);
    const Vector b = random_simplex(rng, 4);
    const auto plan = exact_ot(c, a, b);
    EXPECT_NEAR(plan.value, testing::ot_vertex_oracle(c, a, b), 1e-12);
    EXPECT_LT((plan.plan.rowwise().sum() - a).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((plan.plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(plan.plan.minCoeff(), 0.0);
    EXPECT_LE((plan.plan.array() > 0.0).count(), 6);
  }
}

TEST(ExactOt, DegenerateMarginals) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    Matrix c(3, 6);
    for (auto& x : c.reshaped()) x = u(rng);
    const Vector a = uniform_weights(3);
    const Vector b = uniform_weights(6);
    EXPECT_NEAR(exact_ot(c, a, b).value, testing::ot_vertex_oracle(c, a, b), 1e-12);
  }
}

TEST(ExactOt, MatchesPermutations) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 60; ++t) {
    const Eigen::Index K = 2 + t % 5;
    const Matrix c = cost_matrix(sphere_rows(rng, K, 3), sphere_rows(rng, K, 3));
    EXPECT_NEAR(exact_ot(c, uniform_weights(K), uniform_weights(K)).value,
                testing::permutation_oracle(c), 1e-12);
  }
}

TEST(ExactOt, Errors) {
  const Matrix c = Matrix::Ones(2, 2);
  EXPECT_EQ(code_of([&] { exact_ot(c, Vector::Constant(2, 0.6), uniform_weights(2)); }),
            ErrorCode::InfeasibleMarginals);
  EXPECT_EQ(code_of([&] { exact_ot(c, (Vector(2) << 1.2, -0.2).finished(), uniform_weights(2)); }),
            ErrorCode::InfeasibleMarginals);
  EXPECT_EQ(code_of([&] { exact_ot(c, uniform_weights(3), uniform_weights(2)); }),
            ErrorCode::DimensionMismatch);
}

TEST(Sinkhorn, ApproachesExactAndKeepsMarginals) {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 10; ++t) {
    const Matrix c = cost_matrix(sphere_rows(rng, 4, 5), sphere_rows(rng, 9, 5));
    const Vector a = random_simplex(rng, 4);
    const Vector b = uniform_weights(9);
    const double exact = exact_ot(c, a, b).value;
    const auto s = sinkhorn(c, a, b, {0.01, 20000, 1e-10});
    EXPECT_TRUE(s.converged);
    EXPECT_LT(s.marginal_violation, 1e-9);
    EXPECT_GE(s.plan.value, exact - 1e-12);
    EXPECT_LT(s.plan.value - exact, 1e-2);
  }
}

TEST(Sinkhorn, NonConvergenceIsReported) {
  std::mt19937_64 rng(17);
  const Matrix c = cost_matrix(sphere_rows(rng, 5, 4), sphere_rows(rng, 7, 4));
  const auto s = sinkhorn(c, uniform_weights(5), uniform_weights(7), {1e-3, 2, 1e-14});
  EXPECT_FALSE(s.converged);
  EXPECT_EQ(s.iterations, 2);
  EXPECT_GT(s.marginal_violation, 0.0);
  EXPECT_TRUE(s.plan.plan.allFinite());
}

TEST(Sinkhorn, Errors) {
  const Matrix c = Matrix::Ones(2, 2);
  EXPECT_THROW(sinkhorn(c, uniform_weights(2), uniform_weights(2), {0.0, 10, 1e-6}), Error);
  EXPECT_EQ(code_of([&] { sinkhorn(c, Vector::Constant(2, 0.7), uniform_weights(2)); }),
            ErrorCode::InfeasibleMarginals);
}

TEST(Wasserstein, SwitchesSolverOnBound) {
  std::mt19937_64 rng(18);
  const Matrix taus = sphere_rows(rng, 4, 6);
  const Matrix zs = sphere_rows(rng, 8, 6);
  const auto exact = wasserstein_loss(taus, zs);
  EXPECT_TRUE(exact.exact);
  WassersteinOptions opts;
  opts.exact_bound = 31;
  opts.sinkhorn = {0.005, 50000, 1e-10};
  const auto approx = wasserstein_loss(taus, zs, {}, opts);
  EXPECT_FALSE(approx.exact);
  EXPECT_NEAR(approx.value, exact.value, 1e-2);
}

TEST(Wasserstein, GradientIsMinusPlanTimesPoints) {
  std::mt19937_64 rng(19);
  const Matrix taus = sphere_rows(rng, 3, 4);
  const Matrix zs = sphere_rows(rng, 6, 4);
  const auto w = wasserstein_loss(taus, zs);
  const Matrix g = wasserstein_grad_taus(w.plan, zs);
  for (Eigen::Index k = 0; k < 3; ++k) {
    Vector expect = Vector::Zero(4);
    for (Eigen::Index n = 0; n < 6; ++n) expect -= w.plan.plan(k, n) * zs.row(n).transpose();
    EXPECT_LT((g.row(k).transpose() - expect).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Oracle, EqualsExactOtUnderUniformPi) {
  std::mt19937_64 rng(20);
  for (int t = 0; t < 40; ++t) {
    const Eigen::Index K = 2 + t % 2;
    const Eigen::Index B = K * (2 + t % 3);
    const Matrix taus = sphere_rows(rng, K, 4);
    const Matrix zs = sphere_rows(rng, B, 4);
    const auto oracle = constrained_clustering_oracle(taus, zs, uniform_weights(K));
    EXPECT_NEAR(oracle.value, wasserstein_loss(taus, zs).value, 1e-12);
    EXPECT_NEAR(assignment_cost(taus, zs, oracle.assignment), oracle.value, 1e-15);
    std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
    for (auto k : oracle.assignment.sigma) ++counts[k];
    for (auto c : counts) EXPECT_EQ(c, static_cast<std::size_t>(B / K));
  }
}

TEST(Oracle, NonUniformIntegralPi) {
  std::mt19937_64 rng(21);
  const Matrix taus = sphere_rows(rng, 3, 3);
  const Matrix zs = sphere_rows(rng, 8, 3);
  const Vector pi = (Vector(3) << 0.25, 0.5, 0.25).finished();
  const auto oracle = constrained_clustering_oracle(taus, zs, pi);
  EXPECT_NEAR(oracle.value, wasserstein_loss(taus, zs, pi).value, 1e-12);
}

TEST(Oracle, Guards) {
  std::mt19937_64 rng(22);
  const Matrix taus = sphere_rows(rng, 3, 3);
  EXPECT_EQ(code_of([&] {
              constrained_clustering_oracle(taus, sphere_rows(rng, 7, 3), uniform_weights(3));
            }),
            ErrorCode::NonIntegralCardinalities);
  EXPECT_EQ(code_of([&] {
              constrained_clustering_oracle(taus, sphere_rows(rng, 30, 3), uniform_weights(3));
            }),
            ErrorCode::TooLarge);
}

TEST(NearestAssignment, NoCapacityAndTies) {
  Matrix taus(2, 2);
  taus << 1, 0, 0, 1;
  Matrix zs(3, 2);
  zs << 1, 0, 0.6, 0.8, std::sqrt(0.5), std::sqrt(0.5);
  const auto a = nearest_assignment(taus, zs);
  EXPECT_EQ(a.sigma, (std::vector<std::size_t>{0, 1, 0}));
  // The nearest assignment lower-bounds every capacity-constrained one.
  std::mt19937_64 rng(23);
  const Matrix t2 = sphere_rows(rng, 2, 3);
  const Matrix z2 = sphere_rows(rng, 6, 3);
  EXPECT_LE(assignment_cost(t2, z2, nearest_assignment(t2, z2)),
            constrained_clustering_oracle(t2, z2, uniform_weights(2)).value + 1e-15);
}

}  // namespace
}  // namespace crpl
