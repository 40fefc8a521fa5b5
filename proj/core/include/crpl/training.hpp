// SPDX-License-Identifier: Apache-2.0
//
// Joint prompt training: L_total = L_S + lambda_T L_T + lambda_W L_W,
// minimized with mini-batch SGD + momentum under a cosine learning-rate
// schedule.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "crpl/embedding.hpp"
#include "crpl/evaluate.hpp"
#include "crpl/prompt.hpp"
#include "crpl/pseudo_label.hpp"
#include "crpl/transport.hpp"

namespace crpl {

enum class AblationMode {
  CRPL,      // enhanced pseudo-labels + Wasserstein clustering
  SPLOnly,   // enhanced pseudo-labels, no clustering term
  CPLOnly,   // thresholded zero-shot hard labels, no clustering term
  CPLWithW,  // thresholded zero-shot hard labels + clustering term
};

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view name);

struct TrainConfig {
  double lambda_T = 0.5;
  double lambda_W = 0.5;
  double gamma = 0.01;
  double lr = 0.005;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  double sinkhorn_epsilon = 0.05;
  int sinkhorn_max_iter = 1000;
  double sinkhorn_tol = 1e-6;
  WeightMetric weight_metric = WeightMetric::L2;
  WeightSign weight_sign = WeightSign::Softmin;
  std::size_t exact_ot_bound = 512;
  AblationMode ablation_mode = AblationMode::CRPL;
  double alpha = 0.5;
  std::size_t shared_length = 16;  // M1
  std::size_t domain_length = 16;  // M2
  double init_std = 0.02;
  bool source_combined = false;

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
  /// lambda_W actually applied under the ablation mode.
  double effective_lambda_W() const;
  WassersteinOptions wasserstein_options() const;
};

/// The frozen text side: encoder seed and widths plus the frozen class and
/// base-context tokens.
struct TextInit {
  std::uint64_t encoder_seed = 0;
  std::size_t token_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix class_tokens;  // K x d_tok
  Matrix base_context;  // base_length x d_tok
};

struct TrainingData {
  std::vector<DomainDataset> sources;  // labeled
  DomainDataset target;                // unlabeled
  TextInit text;

  std::size_t num_classes() const { return static_cast<std::size_t>(text.class_tokens.rows()); }
  void validate() const;
};

/// Merge all sources into one labeled domain (the source-combined setting).
DomainDataset combine_sources(std::span<const DomainDataset> sources, std::size_t num_classes);

struct OptimizerState {
  LearnablePrompts momentum;
  std::size_t step = 0;
  std::size_t total_steps = 0;
  std::size_t epoch = 0;  // completed epochs
};

/// lr0 * (1 + cos(pi * step / total_steps)) / 2.
double cosine_learning_rate(double base_lr, std::size_t step, std::size_t total_steps);

struct StepReport {
  double L_S = 0.0;
  double L_T = 0.0;
  double L_W = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double L_S = 0.0;
  double L_T = 0.0;
  double L_W = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double lambda_T = 0.0;
  double lambda_W = 0.0;
  std::optional<EvalReport> eval;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
};

/// Full-data objective, used to compare the model before and after training.
struct ObjectiveValue {
  double L_S = 0.0;
  double L_T = 0.0;
  double L_W = 0.0;
  double total = 0.0;
};

class Trainer {
 public:
  using Evaluator = std::function<EvalReport(const PromptBank&, const TextEncoder&)>;

  Trainer(TrainingData data, TrainConfig config);
  /// Resume from a saved bank and optimizer state.
  Trainer(TrainingData data, TrainConfig config, PromptBank bank, OptimizerState optimizer);

  const PromptBank& bank() const noexcept { return bank_; }
  const TextEncoder& encoder() const noexcept { return encoder_; }
  const OptimizerState& optimizer() const noexcept { return optimizer_; }
  const TrainConfig& config() const noexcept { return config_; }
  const TrainingData& data() const noexcept { return data_; }
  const CentroidTable& centroids() const noexcept { return centroids_; }
  const TextTable& base_table() const noexcept { return base_table_; }

  std::size_t steps_per_epoch() const;

  void set_evaluator(Evaluator evaluator) { evaluator_ = std::move(evaluator); }

  /// Soft labels (B x K) for the given target samples under the ablation mode.
  Matrix pseudo_labels(std::span<const std::size_t> target_indices) const;

  StepReport step(std::span<const std::size_t> target_indices,
                  std::span<const std::vector<std::size_t>> source_indices);
  EpochReport run_epoch();
  /// Run until `config.epochs` epochs are complete.
  TrainReport run(const std::function<void(const EpochReport&)>& on_epoch = {});

  ObjectiveValue full_objective() const;

 private:
  void initialize_caches();

  TrainConfig config_;
  TrainingData data_;
  TextEncoder encoder_;
  PromptBank bank_;
  OptimizerState optimizer_;
  CentroidTable centroids_;
  TextTable base_table_;
  std::vector<std::optional<std::size_t>> hard_labels_;
  Evaluator evaluator_;
};

struct TrainResult {
  PromptBank bank;
  TrainReport report;
  OptimizerState optimizer;
};

TrainResult train(TrainingData data, const TrainConfig& config,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

}  // namespace crpl
