// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "crpl/losses.hpp"
#include "oracles.hpp"

namespace crpl {
namespace {

using testing::GradientProblem;
using testing::make_gradient_problem;

constexpr double kGamma = 0.05;

std::vector<LabeledBatch> batches_of(const GradientProblem& p) {
  std::vector<LabeledBatch> out;
  for (std::size_t i = 0; i < p.source_z.size(); ++i)
    out.push_back({i, p.source_z[i], p.source_labels[i]});
  return out;
}

double fixed_plan_value(const PromptBank& bank, const TextEncoder& enc, const Matrix& z,
                        const Matrix& plan) {
  const Matrix table = to_matrix(text_embedding_table(bank, enc, Owner::target()));
  return plan.cwiseProduct(Matrix::Ones(plan.rows(), plan.cols()) - table * z.transpose()).sum();
}

TEST(SourceLoss, PerfectPredictionIsZero) {
  auto p = make_gradient_problem(1, 3, 1, 8, 3);
  const TextTable table = text_embedding_table(p.bank, p.encoder, Owner::source(0));
  LabeledBatch b{0, to_matrix(table), {0, 1, 2}};
  const auto l = source_loss(p.bank, p.encoder, std::span(&b, 1), Temperature(1e-4));
  EXPECT_NEAR(l.value, 0.0, 1e-12);
}

TEST(SourceLoss, UniformIsLogK) {
  auto p = make_gradient_problem(2, 4, 2, 8, 5);
  auto batches = batches_of(p);
  // At a very high temperature every class is equally likely.
  const auto l = source_loss(p.bank, p.encoder, batches, Temperature(1e9));
  EXPECT_NEAR(l.value, std::log(4.0), 1e-9);
}

TEST(SourceLoss, MeanOverDomains) {
  auto p = make_gradient_problem(3);
  auto batches = batches_of(p);
  const double both = source_loss(p.bank, p.encoder, batches, Temperature(kGamma)).value;
  const double a = source_loss(p.bank, p.encoder, std::span(batches.data(), 1), Temperature(kGamma)).value;
  const double b = source_loss(p.bank, p.encoder, std::span(batches.data() + 1, 1), Temperature(kGamma)).value;
  EXPECT_NEAR(both, 0.5 * (a + b), 1e-12);
}

TEST(SourceLoss, GradientMatchesFiniteDifferences) {
  auto p = make_gradient_problem(4);
  const auto batches = batches_of(p);
  const auto l = source_loss(p.bank, p.encoder, batches, Temperature(kGamma));
  EXPECT_EQ(l.grad.target.cwiseAbs().maxCoeff(), 0.0);
  std::mt19937_64 rng(4);
  const auto n = testing::coordinate_count(l.grad);
  for (int t = 0; t < 30; ++t) {
    const auto c = rng() % n;
    auto grad = l.grad;
    const double fd = testing::central_difference(
        testing::coordinate(p.bank.learnable(), c),
        [&] { return source_loss(p.bank, p.encoder, batches, Temperature(kGamma)).value; }, 1e-5);
    EXPECT_LT(testing::relative_error(testing::coordinate(grad, c), fd), 1e-4) << c;
  }
}

TEST(TargetLoss, OneHotIsHardCrossEntropy) {
  auto p = make_gradient_problem(5);
  Matrix one_hot = Matrix::Zero(p.target_z.rows(), 3);
  std::vector<std::size_t> labels;
  for (Eigen::Index r = 0; r < one_hot.rows(); ++r) {
    one_hot(r, r % 3) = 1.0;
    labels.push_back(static_cast<std::size_t>(r % 3));
  }
  const double soft = target_loss(p.bank, p.encoder, p.target_z, one_hot, Temperature(kGamma)).value;
  const Matrix probs = class_probabilities(
      p.target_z, to_matrix(text_embedding_table(p.bank, p.encoder, Owner::target())),
      Temperature(kGamma));
  double hard = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r)
    hard -= std::log(probs(r, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)])));
  EXPECT_NEAR(soft, hard / static_cast<double>(probs.rows()), 1e-12);
}

TEST(TargetLoss, UniformLabelsBoundedByLogK) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto p = make_gradient_problem(seed);
    const Matrix uniform = Matrix::Constant(p.target_z.rows(), 3, 1.0 / 3.0);
    EXPECT_GE(target_loss(p.bank, p.encoder, p.target_z, uniform, Temperature(kGamma)).value,
              std::log(3.0) - 1e-12);
  }
  auto p = make_gradient_problem(0);
  const Matrix uniform = Matrix::Constant(p.target_z.rows(), 3, 1.0 / 3.0);
  EXPECT_NEAR(target_loss(p.bank, p.encoder, p.target_z, uniform, Temperature(1e9)).value,
              std::log(3.0), 1e-9);
}

TEST(TargetLoss, ZeroRowsDropSamples) {
  auto p = make_gradient_problem(6);
  Matrix labels = p.soft_labels;
  labels.row(0).setZero();
  const double full = target_loss(p.bank, p.encoder, p.target_z, labels, Temperature(kGamma)).value;
  const double rest = target_loss(p.bank, p.encoder, p.target_z.bottomRows(5),
                                  labels.bottomRows(5), Temperature(kGamma)).value;
  EXPECT_NEAR(full, rest * 5.0 / 6.0, 1e-12);
}

TEST(TargetLoss, GradientMatchesFiniteDifferences) {
  auto p = make_gradient_problem(7);
  const auto l = target_loss(p.bank, p.encoder, p.target_z, p.soft_labels, Temperature(kGamma));
  for (const auto& s : l.grad.sources) EXPECT_EQ(s.cwiseAbs().maxCoeff(), 0.0);
  std::mt19937_64 rng(7);
  const auto n = testing::coordinate_count(l.grad);
  for (int t = 0; t < 30; ++t) {
    const auto c = rng() % n;
    auto grad = l.grad;
    const double fd = testing::central_difference(
        testing::coordinate(p.bank.learnable(), c),
        [&] {
          return target_loss(p.bank, p.encoder, p.target_z, p.soft_labels, Temperature(kGamma))
              .value;
        },
        1e-5);
    EXPECT_LT(testing::relative_error(testing::coordinate(grad, c), fd), 1e-4) << c;
  }
}

TEST(WassersteinTerm, FixedPlanGradient) {
  auto p = make_gradient_problem(8);
  const auto w = wasserstein_term(p.bank, p.encoder, p.target_z, {});
  for (const auto& s : w.loss.grad.sources) EXPECT_EQ(s.cwiseAbs().maxCoeff(), 0.0);
  const Matrix plan = w.transport.plan.plan;
  EXPECT_NEAR(fixed_plan_value(p.bank, p.encoder, p.target_z, plan), w.loss.value, 1e-12);
  std::mt19937_64 rng(8);
  const auto n = testing::coordinate_count(w.loss.grad);
  for (int t = 0; t < 30; ++t) {
    const auto c = rng() % n;
    auto grad = w.loss.grad;
    const double fd = testing::central_difference(
        testing::coordinate(p.bank.learnable(), c),
        [&] { return fixed_plan_value(p.bank, p.encoder, p.target_z, plan); }, 1e-5);
    EXPECT_LT(testing::relative_error(testing::coordinate(grad, c), fd), 1e-4) << c;
  }
}

TEST(WassersteinTerm, ResolvedGradient) {
  auto p = make_gradient_problem(9);
  const auto w = wasserstein_term(p.bank, p.encoder, p.target_z, {});
  std::mt19937_64 rng(9);
  const auto n = testing::coordinate_count(w.loss.grad);
  for (int t = 0; t < 20; ++t) {
    const auto c = rng() % n;
    auto grad = w.loss.grad;
    const double fd = testing::central_difference(
        testing::coordinate(p.bank.learnable(), c),
        [&] { return wasserstein_term(p.bank, p.encoder, p.target_z, {}).loss.value; }, 1e-5);
    EXPECT_LT(testing::relative_error(testing::coordinate(grad, c), fd), 1e-3) << c;
  }
}

}  // namespace
}  // namespace crpl
