// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "crpl/ablation.hpp"
#include "crpl/error.hpp"
#include "crpl/evaluate.hpp"
#include "crpl/json_io.hpp"
#include "crpl/synthetic.hpp"
#include "oracles.hpp"

namespace crpl {
namespace {

TextEncoder encoder_of(const DatasetBundle& d) {
  return TextEncoder(d.text.token_dim, d.text.hidden_dim, d.dim(), d.text.encoder_seed);
}

TEST(Synthetic, BalancedLabels) {
  const auto b = generate_synthetic({});
  ASSERT_EQ(b.data.sources.size(), 3u);
  for (const auto& s : b.data.sources) {
    EXPECT_EQ(s.size(), 500u);
    EXPECT_EQ(s.dim(), 64);
    std::vector<std::size_t> counts(10, 0);
    for (auto y : s.labels()) ++counts[y];
    for (auto c : counts) EXPECT_EQ(c, 50u);
  }
  EXPECT_FALSE(b.data.target.is_labeled());
  EXPECT_EQ(b.data.target_labels.size(), 500u);
  EXPECT_GE(b.fit_accuracy, 95.0);
  for (Eigen::Index k = 0; k < b.prototypes.rows(); ++k)
    EXPECT_NEAR(b.prototypes.row(k).norm(), 1.0, 1e-12);
}

TEST(Synthetic, RawRadiusAndFloatPayload) {
  const auto b = generate_synthetic({});
  double mean_norm = 0.0;
  for (const auto& r : b.data.target.raw()) {
    mean_norm += r.values().norm();
    for (double x : r.values()) EXPECT_EQ(x, static_cast<double>(static_cast<float>(x)));
  }
  mean_norm /= static_cast<double>(b.data.target.size());
  EXPECT_GT(mean_norm, 10.0);
  EXPECT_LT(mean_norm, 14.0);
}

TEST(Synthetic, NoiselessUnrotatedIsPerfect) {
  SyntheticSpec s;
  s.domain_rotation_deg = 0.0;
  s.noise_sigma = 0.0;
  const auto b = generate_synthetic(s);
  const auto base = base_text_table(encoder_of(b.data), b.data.text.class_tokens,
                                    b.data.text.base_context);
  EXPECT_EQ(table_accuracy(b.data.target, b.data.target_labels, base), 100.0);
  EXPECT_EQ(b.fit_accuracy, 100.0);
}

TEST(Synthetic, RotationMovesPrototypesByTheAngle) {
  const Vector x = Vector::Unit(4, 0);
  const Vector u = Vector::Unit(4, 0);
  const Vector v = Vector::Unit(4, 1);
  const Vector y = rotate_in_plane(x, u, v, std::numbers::pi / 6);
  EXPECT_NEAR(y(0), std::sqrt(3.0) / 2, 1e-15);
  EXPECT_NEAR(y(1), 0.5, 1e-15);
  EXPECT_NEAR(rotate_in_plane(Vector::Unit(4, 2), u, v, 1.0)(2), 1.0, 1e-15);
}

TEST(Synthetic, DeterministicPerSeed) {
  EXPECT_EQ(dataset_fingerprint(generate_synthetic({}).data),
            dataset_fingerprint(generate_synthetic({}).data));
  SyntheticSpec other;
  other.seed = 8;
  EXPECT_NE(dataset_fingerprint(generate_synthetic(other).data),
            dataset_fingerprint(generate_synthetic({}).data));
}

TEST(Synthetic, SpecValidation) {
  SyntheticSpec s;
  s.num_classes = 1;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = {};
  s.dim = 3;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = {};
  s.samples_per_domain = 505;
  EXPECT_THROW(generate_synthetic(s), Error);
  EXPECT_EQ(synthetic_spec_from_json(R"({"K": 5, "d": 16})").num_classes, 5u);
  EXPECT_THROW(synthetic_spec_from_json(R"({"classes": 5})"), Error);
}

TEST(Synthetic, FitFailureIsReported) {
  SyntheticSpec s;
  s.noise_sigma = 6.0;
  try {
    generate_synthetic(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeedFitFailure);
  }
}

TEST(Synthetic, PinnedBaseAccuracy) {
  // Measured on the default benchmark; the rotation does not cost the
  // frozen base prompt a single target sample.
  const auto b = generate_synthetic({});
  const auto base = base_text_table(encoder_of(b.data), b.data.text.class_tokens,
                                    b.data.text.base_context);
  EXPECT_EQ(table_accuracy(b.data.target, b.data.target_labels, base), 100.0);
}

TEST(Evaluate, MatchesLoopAndCount) {
  SyntheticSpec s;
  s.noise_sigma = 3.0;
  s.fit_threshold = 0.0;
  s.domain_rotation_deg = 60.0;
  const auto b = generate_synthetic(s);
  const auto enc = encoder_of(b.data);
  const auto bank = PromptBank::initialize({10, 3, 4, 4, 64}, b.data.text.class_tokens,
                                           b.data.text.base_context, 2, 0.3);
  const Matrix z = b.data.target.unit_rows();
  for (auto mode : {InferenceMode::TauT, InferenceMode::TauS, InferenceMode::TauAvg,
                    InferenceMode::Base}) {
    const double acc = evaluate(bank, enc, b.data.target, b.data.target_labels, mode);
    const double ref =
        testing::accuracy_oracle(z, b.data.target_labels, to_matrix(inference_table(bank, enc, mode)));
    EXPECT_EQ(acc, ref) << to_string(mode);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 100.0);
  }
  const auto all = evaluate_all(bank, enc, b.data.target, b.data.target_labels);
  EXPECT_EQ(all.accuracy_tau_T, evaluate(bank, enc, b.data.target, b.data.target_labels,
                                         InferenceMode::TauT));
}

TEST(Evaluate, SingleSampleAndSingleSource) {
  const TextEncoder enc(4, 4, 4, 1);
  const auto bank = PromptBank::initialize({2, 1, 2, 2, 4}, Matrix::Identity(2, 4) * 3.0,
                                           Matrix::Zero(1, 4), 4, 0.3);
  const auto src = text_embedding_table(bank, enc, Owner::source(0));
  const auto target = DomainDataset::unlabeled("t", {RawEmbedding(src[1].values() * 2.0)});
  const std::vector<std::size_t> label{1};
  EXPECT_EQ(table_accuracy(target, label, src), 100.0);
  const auto tau_s = inference_table(bank, enc, InferenceMode::TauS);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(tau_s[k].values(), src[k].values());
}

TEST(Evaluate, MeanTableIsRenormalized) {
  const TextTable a{UnitEmbedding(Vector::Unit(2, 0))};
  const TextTable b{UnitEmbedding(Vector::Unit(2, 1))};
  const std::vector<TextTable> both{a, b};
  const auto m = mean_table(both);
  EXPECT_NEAR(m[0].values()(0), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(m[0].values()(1), std::sqrt(0.5), 1e-15);
}

TEST(Ablation, SharedDataAndAllInferenceModes) {
  SyntheticSpec s;
  s.num_classes = 4;
  s.dim = 8;
  s.n_sources = 2;
  s.samples_per_domain = 40;
  TrainConfig c;
  c.epochs = 2;
  c.shared_length = 2;
  c.domain_length = 2;
  const auto modes = all_ablation_modes();
  const auto table = run_ablation(s, c, modes);
  ASSERT_EQ(table.rows.size(), 4u);
  EXPECT_EQ(table.data_fingerprint, dataset_fingerprint(generate_synthetic(s).data));
  const auto& crpl = table.row(AblationMode::CRPL);
  for (double acc : {crpl.eval.accuracy_tau_T, crpl.eval.accuracy_tau_S,
                     crpl.eval.accuracy_tau_avg, crpl.eval.accuracy_zero_shot_base}) {
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 100.0);
  }
  EXPECT_NE(to_json(table).find("\"mode\":\"CPL_with_W\""), std::string::npos);
  EXPECT_EQ(table.row(AblationMode::CPLOnly).eval.accuracy_zero_shot_base,
            crpl.eval.accuracy_zero_shot_base);
}

}  // namespace
}  // namespace crpl
