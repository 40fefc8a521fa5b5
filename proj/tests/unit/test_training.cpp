// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "crpl/error.hpp"
#include "crpl/json_io.hpp"
#include "crpl/synthetic.hpp"
#include "crpl/training.hpp"

namespace crpl {
namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_classes = 4;
  s.dim = 8;
  s.n_sources = 2;
  s.samples_per_domain = 40;
  s.noise_sigma = 2.0;
  s.domain_rotation_deg = 40.0;
  s.seed = 3;
  return s;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.shared_length = 3;
  c.domain_length = 2;
  c.gamma = 0.05;
  c.seed = 11;
  return c;
}

const DatasetBundle& data() {
  static const DatasetBundle d = generate_synthetic(small_spec()).data;
  return d;
}

bool same(const LearnablePrompts& a, const LearnablePrompts& b) {
  LearnablePrompts diff = a;
  diff.add_scaled(b, -1.0);
  return diff.squared_norm() == 0.0;
}

TEST(CosineSchedule, Endpoints) {
  EXPECT_NEAR(cosine_learning_rate(0.005, 0, 100), 0.005, 1e-12);
  EXPECT_NEAR(cosine_learning_rate(0.005, 100, 100), 0.0, 1e-12);
  EXPECT_NEAR(cosine_learning_rate(0.005, 50, 100), 0.0025, 1e-12);
  for (std::size_t s = 1; s <= 100; ++s)
    EXPECT_LE(cosine_learning_rate(1.0, s, 100), cosine_learning_rate(1.0, s - 1, 100));
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.lambda_W = -1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(TrainConfig, EffectiveLambdaW) {
  TrainConfig c;
  for (auto m : {AblationMode::CRPL, AblationMode::CPLWithW}) {
    c.ablation_mode = m;
    EXPECT_EQ(c.effective_lambda_W(), 0.5);
  }
  for (auto m : {AblationMode::SPLOnly, AblationMode::CPLOnly}) {
    c.ablation_mode = m;
    EXPECT_EQ(c.effective_lambda_W(), 0.0);
  }
  for (auto m : {AblationMode::CRPL, AblationMode::SPLOnly, AblationMode::CPLOnly,
                 AblationMode::CPLWithW})
    EXPECT_EQ(parse_ablation_mode(to_string(m)), m);
}

TEST(TrainConfig, JsonOverrides) {
  const auto c = train_config_from_json(
      R"({"lambda_T": 0.25, "weight_metric": "cosine", "ablation_mode": "SPL_only", "epochs": 7})");
  EXPECT_EQ(c.lambda_T, 0.25);
  EXPECT_EQ(c.weight_metric, WeightMetric::Cosine);
  EXPECT_EQ(c.ablation_mode, AblationMode::SPLOnly);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_EQ(c.lr, 0.005);
  EXPECT_EQ(train_config_from_json(to_json(c)).lambda_T, 0.25);
  EXPECT_THROW(train_config_from_json(R"({"lamda_T": 1})"), Error);
  EXPECT_THROW(train_config_from_json(R"({"batch_size": -3})"), Error);
  EXPECT_THROW(train_config_from_json(R"({"lr": "fast"})"), Error);
  EXPECT_THROW(train_config_from_json("[1]"), Error);
}

TEST(Trainer, ZeroEpochsLeavesBankUnchanged) {
  auto c = small_config();
  c.epochs = 0;
  const Trainer fresh(data().training_data(), c);
  const auto result = train(data().training_data(), c);
  EXPECT_TRUE(result.report.epochs.empty());
  EXPECT_TRUE(same(result.bank.learnable(), fresh.bank().learnable()));
}

TEST(Trainer, DeterministicReports) {
  const auto a = train(data().training_data(), small_config());
  const auto b = train(data().training_data(), small_config());
  ASSERT_EQ(a.report.epochs.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e)
    EXPECT_EQ(to_json_line(a.report.epochs[e]), to_json_line(b.report.epochs[e]));
  EXPECT_TRUE(same(a.bank.learnable(), b.bank.learnable()));
  auto other = small_config();
  other.seed = 12;
  EXPECT_FALSE(same(train(data().training_data(), other).bank.learnable(), a.bank.learnable()));
}

TEST(Trainer, TotalIsWeightedSum) {
  for (auto mode : {AblationMode::CRPL, AblationMode::CPLOnly}) {
    auto c = small_config();
    c.ablation_mode = mode;
    const auto r = train(data().training_data(), c);
    for (const auto& e : r.report.epochs) {
      EXPECT_NEAR(e.total, e.L_S + e.lambda_T * e.L_T + e.lambda_W * e.L_W, 1e-9);
      EXPECT_GT(e.L_W, 0.0);
    }
  }
}

TEST(Trainer, ZeroLambdasLeaveTargetPromptUntouched) {
  auto c = small_config();
  c.lambda_T = 0.0;
  c.lambda_W = 0.0;
  Trainer t(data().training_data(), c);
  const Matrix before = t.bank().learnable().target;
  t.run();
  EXPECT_EQ(t.bank().learnable().target, before);
}

TEST(Trainer, FirstEpochLowersObjective) {
  auto c = small_config();
  c.lr = 0.05;
  Trainer t(data().training_data(), c);
  const double before = t.full_objective().total;
  t.run_epoch();
  EXPECT_LT(t.full_objective().total, before);
}

TEST(Trainer, CplLabelsAreThresholdedOneHot) {
  auto c = small_config();
  c.ablation_mode = AblationMode::CPLOnly;
  c.alpha = 0.9;
  const Trainer t(data().training_data(), c);
  std::vector<std::size_t> all(data().target.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Matrix y = t.pseudo_labels(all);
  const auto hard = hard_threshold_labels(data().target, t.base_table(), Temperature(c.gamma), 0.9);
  for (std::size_t j = 0; j < all.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    if (hard[j]) {
      EXPECT_EQ(y(r, static_cast<Eigen::Index>(*hard[j])), 1.0);
      EXPECT_EQ(y.row(r).sum(), 1.0);
    } else {
      EXPECT_EQ(y.row(r).sum(), 0.0);
    }
  }
}

TEST(Trainer, EnhancedLabelsOnSimplex) {
  const Trainer t(data().training_data(), small_config());
  std::vector<std::size_t> idx{0, 5, 9};
  const Matrix y = t.pseudo_labels(idx);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    EXPECT_NEAR(y.row(r).sum(), 1.0, 1e-9);
    EXPECT_GE(y.row(r).minCoeff(), 0.0);
  }
}

TEST(Trainer, SourceCombinedUsesOnePrompt) {
  auto c = small_config();
  c.source_combined = true;
  const auto r = train(data().training_data(), c);
  EXPECT_EQ(r.bank.num_sources(), 1u);
}

TEST(Trainer, RejectsLabeledTarget) {
  auto d = data().training_data();
  d.target = d.sources[0];
  EXPECT_THROW(Trainer(d, small_config()), Error);
}

TEST(Trainer, ResumeMatchesUninterrupted) {
  auto c = small_config();
  c.epochs = 4;
  Trainer full(data().training_data(), c);
  full.run();
  Trainer first(data().training_data(), c);
  first.run_epoch();
  first.run_epoch();
  Trainer second(data().training_data(), c, first.bank(), first.optimizer());
  second.run();
  EXPECT_TRUE(same(full.bank().learnable(), second.bank().learnable()));
}

}  // namespace
}  // namespace crpl
