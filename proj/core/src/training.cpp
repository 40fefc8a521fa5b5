// SPDX-License-Identifier: Apache-2.0
#include "crpl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "crpl/error.hpp"
#include "crpl/losses.hpp"
#include "crpl/random.hpp"

namespace crpl {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554600000000ULL;  // "SHUF"

bool is_zero(const Matrix& m) { return m.isZero(0.0); }

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::size_t epoch,
                                          std::size_t domain) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, kShuffleStream + (static_cast<std::uint64_t>(epoch) << 8) + domain);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TextEncoder make_encoder(const TrainingData& data) {
  return TextEncoder(data.text.token_dim, data.text.hidden_dim,
                     static_cast<std::size_t>(data.target.dim()), data.text.encoder_seed);
}

TrainingData prepare(TrainingData data, const TrainConfig& config) {
  config.validate();
  data.validate();
  if (config.source_combined && data.sources.size() > 1) {
    auto merged = combine_sources(data.sources, data.num_classes());
    data.sources.clear();
    data.sources.push_back(std::move(merged));
  }
  return data;
}

PromptShape shape_for(const TrainingData& data, const TrainConfig& config) {
  return PromptShape{data.num_classes(), data.sources.size(), config.shared_length,
                     config.domain_length, data.text.token_dim};
}

}  // namespace

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::CRPL: return "CRPL";
    case AblationMode::SPLOnly: return "SPL_only";
    case AblationMode::CPLOnly: return "CPL_only";
    case AblationMode::CPLWithW: return "CPL_with_W";
  }
  return "CRPL";
}

AblationMode parse_ablation_mode(std::string_view name) {
  if (name == "CRPL") return AblationMode::CRPL;
  if (name == "SPL_only") return AblationMode::SPLOnly;
  if (name == "CPL_only") return AblationMode::CPLOnly;
  if (name == "CPL_with_W") return AblationMode::CPLWithW;
  fail(ErrorCode::InvalidArgument, "unknown ablation mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  require(lambda_T >= 0.0 && lambda_W >= 0.0, ErrorCode::InvalidArgument,
          "loss weights must be nonnegative");
  require(gamma > 0.0, ErrorCode::InvalidArgument, "gamma must be positive");
  require(lr > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::InvalidArgument,
          "momentum must lie in [0, 1)");
  require(batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");
  require(sinkhorn_epsilon > 0.0, ErrorCode::InvalidArgument, "sinkhorn epsilon must be > 0");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
  require(shared_length >= 1 && domain_length >= 1, ErrorCode::InvalidArgument,
          "prompt lengths must be >= 1");
}

double TrainConfig::effective_lambda_W() const {
  return (ablation_mode == AblationMode::CRPL || ablation_mode == AblationMode::CPLWithW)
             ? lambda_W
             : 0.0;
}

WassersteinOptions TrainConfig::wasserstein_options() const {
  return WassersteinOptions{exact_ot_bound,
                            SinkhornOptions{sinkhorn_epsilon, sinkhorn_max_iter, sinkhorn_tol}};
}

void TrainingData::validate() const {
  require(!sources.empty(), ErrorCode::InvalidArgument, "at least one source domain is required");
  require(!target.is_labeled(), ErrorCode::InvalidArgument,
          "the training target domain must not carry labels");
  require(text.class_tokens.rows() >= 1, ErrorCode::EmptyInput, "no class tokens");
  require(static_cast<std::size_t>(text.class_tokens.cols()) == text.token_dim &&
              static_cast<std::size_t>(text.base_context.cols()) == text.token_dim,
          ErrorCode::DimensionMismatch, "frozen tokens do not match the token dimension");
  for (const auto& s : sources) {
    require(s.is_labeled(), ErrorCode::InvalidArgument, "source domains must be labeled");
    require(s.dim() == target.dim(), ErrorCode::DimensionMismatch,
            "source and target embeddings differ in dimension");
  }
}

DomainDataset combine_sources(std::span<const DomainDataset> sources, std::size_t num_classes) {
  std::vector<RawEmbedding> raw;
  std::vector<std::size_t> labels;
  for (const auto& s : sources) {
    raw.insert(raw.end(), s.raw().begin(), s.raw().end());
    labels.insert(labels.end(), s.labels().begin(), s.labels().end());
  }
  return DomainDataset::labeled("combined", std::move(raw), std::move(labels), num_classes);
}

double cosine_learning_rate(double base_lr, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return base_lr;
  const double progress =
      static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Trainer::Trainer(TrainingData data, TrainConfig config)
    : config_(config),
      data_(prepare(std::move(data), config)),
      encoder_(make_encoder(data_)),
      bank_(PromptBank::initialize(shape_for(data_, config_), data_.text.class_tokens,
                                   data_.text.base_context, config_.seed, config_.init_std)),
      centroids_(compute_centroids(data_.sources, data_.num_classes())) {
  optimizer_.momentum = bank_.learnable().zeros_like();
  optimizer_.total_steps = config_.epochs * steps_per_epoch();
  initialize_caches();
}

Trainer::Trainer(TrainingData data, TrainConfig config, PromptBank bank, OptimizerState optimizer)
    : config_(config),
      data_(prepare(std::move(data), config)),
      encoder_(make_encoder(data_)),
      bank_(std::move(bank)),
      optimizer_(std::move(optimizer)),
      centroids_(compute_centroids(data_.sources, data_.num_classes())) {
  const auto expected = shape_for(data_, config_);
  const auto actual = bank_.shape();
  require(actual.num_classes == expected.num_classes &&
              actual.num_sources == expected.num_sources &&
              actual.shared_length == expected.shared_length &&
              actual.domain_length == expected.domain_length &&
              actual.token_dim == expected.token_dim,
          ErrorCode::SchemaMismatch, "resumed prompt bank does not match data and config");
  if (optimizer_.momentum.shared.empty()) optimizer_.momentum = bank_.learnable().zeros_like();
  optimizer_.total_steps = config_.epochs * steps_per_epoch();
  initialize_caches();
}

void Trainer::initialize_caches() {
  base_table_ = text_embedding_table(bank_, encoder_, Owner::base());
  const Temperature gamma(config_.gamma);
  if (config_.ablation_mode == AblationMode::CPLOnly ||
      config_.ablation_mode == AblationMode::CPLWithW)
    hard_labels_ = hard_threshold_labels(data_.target, base_table_, gamma, config_.alpha);
}

std::size_t Trainer::steps_per_epoch() const {
  return (data_.target.size() + config_.batch_size - 1) / config_.batch_size;
}

Matrix Trainer::pseudo_labels(std::span<const std::size_t> target_indices) const {
  const auto classes = static_cast<Eigen::Index>(data_.num_classes());
  Matrix labels = Matrix::Zero(static_cast<Eigen::Index>(target_indices.size()), classes);
  if (!hard_labels_.empty()) {
    for (std::size_t r = 0; r < target_indices.size(); ++r)
      if (const auto& y = hard_labels_.at(target_indices[r]))
        labels(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(*y)) = 1.0;
    return labels;
  }
  // Recomputed from the current source prompts; no gradient flows back.
  std::vector<TextTable> source_tables;
  for (std::size_t i = 0; i < bank_.num_sources(); ++i)
    source_tables.push_back(text_embedding_table(bank_, encoder_, Owner::source(i)));
  const PseudoLabelConfig plc{Temperature(config_.gamma), config_.weight_metric,
                              config_.weight_sign};
  for (std::size_t r = 0; r < target_indices.size(); ++r) {
    const auto j = target_indices[r];
    const auto y = enhanced_pseudo_label(data_.target.unit()[j], data_.target.raw()[j],
                                         base_table_, source_tables, centroids_, plc);
    for (Eigen::Index k = 0; k < classes; ++k)
      labels(static_cast<Eigen::Index>(r), k) = y[static_cast<std::size_t>(k)];
  }
  return labels;
}

StepReport Trainer::step(std::span<const std::size_t> target_indices,
                         std::span<const std::vector<std::size_t>> source_indices) {
  require(source_indices.size() == data_.sources.size(), ErrorCode::DimensionMismatch,
          "one source index list per source domain is required");
  const Temperature gamma(config_.gamma);

  std::vector<LabeledBatch> source_batches;
  for (std::size_t i = 0; i < data_.sources.size(); ++i) {
    LabeledBatch batch{i, data_.sources[i].unit_rows(source_indices[i]), {}};
    for (auto j : source_indices[i]) batch.labels.push_back(data_.sources[i].labels()[j]);
    source_batches.push_back(std::move(batch));
  }
  const Matrix target_z = data_.target.unit_rows(target_indices);
  const Matrix soft_labels = pseudo_labels(target_indices);

  auto ls = source_loss(bank_, encoder_, source_batches, gamma);
  auto lt = target_loss(bank_, encoder_, target_z, soft_labels, gamma);
  auto lw = wasserstein_term(bank_, encoder_, target_z, config_.wasserstein_options());

  // Parameter disjointness: L_S never touches the target block, L_T and L_W
  // never touch a source block.
  require(is_zero(ls.grad.target), ErrorCode::InvalidArgument,
          "source loss leaked into the target prompt");
  for (std::size_t i = 0; i < bank_.num_sources(); ++i)
    require(is_zero(lt.grad.sources[i]) && is_zero(lw.loss.grad.sources[i]),
            ErrorCode::InvalidArgument, "target losses leaked into a source prompt");

  const double lambda_T = config_.lambda_T;
  const double lambda_W = config_.effective_lambda_W();
  LearnablePrompts grad = std::move(ls.grad);
  grad.add_scaled(lt.grad, lambda_T);
  grad.add_scaled(lw.loss.grad, lambda_W);

  StepReport report;
  report.L_S = ls.value;
  report.L_T = lt.value;
  report.L_W = lw.loss.value;
  report.total = ls.value + lambda_T * lt.value + lambda_W * lw.loss.value;
  report.lr = cosine_learning_rate(config_.lr, optimizer_.step, optimizer_.total_steps);

  // SGD with (heavy-ball) momentum: v <- mu v + g, p <- p - lr v.
  optimizer_.momentum.scale(config_.momentum);
  optimizer_.momentum.add_scaled(grad, 1.0);
  bank_.learnable().add_scaled(optimizer_.momentum, -report.lr);
  ++optimizer_.step;
  return report;
}

EpochReport Trainer::run_epoch() {
  const std::size_t epoch = optimizer_.epoch;
  const auto target_order = shuffled_indices(data_.target.size(), config_.seed, epoch, 0);
  std::vector<std::vector<std::size_t>> source_orders;
  for (std::size_t i = 0; i < data_.sources.size(); ++i)
    source_orders.push_back(
        shuffled_indices(data_.sources[i].size(), config_.seed, epoch, i + 1));

  EpochReport out;
  out.epoch = epoch + 1;
  out.lambda_T = config_.lambda_T;
  out.lambda_W = config_.effective_lambda_W();
  const auto steps = steps_per_epoch();
  for (std::size_t s = 0; s < steps; ++s) {
    const auto begin = s * config_.batch_size;
    const auto end = std::min(begin + config_.batch_size, target_order.size());
    const std::span<const std::size_t> target_idx(target_order.data() + begin, end - begin);
    std::vector<std::vector<std::size_t>> source_idx(data_.sources.size());
    for (std::size_t i = 0; i < data_.sources.size(); ++i)
      for (std::size_t r = begin; r < end; ++r)
        source_idx[i].push_back(source_orders[i][r % source_orders[i].size()]);
    const auto row = step(target_idx, source_idx);
    out.L_S += row.L_S;
    out.L_T += row.L_T;
    out.L_W += row.L_W;
    out.total += row.total;
    out.lr = row.lr;
  }
  const double n = static_cast<double>(steps);
  out.L_S /= n;
  out.L_T /= n;
  out.L_W /= n;
  out.total /= n;
  ++optimizer_.epoch;
  if (evaluator_) out.eval = evaluator_(bank_, encoder_);
  return out;
}

TrainReport Trainer::run(const std::function<void(const EpochReport&)>& on_epoch) {
  TrainReport report;
  while (optimizer_.epoch < config_.epochs) {
    report.epochs.push_back(run_epoch());
    require(bank_.learnable().all_finite(), ErrorCode::InvalidArgument,
            "training diverged: non-finite prompt tokens");
    if (on_epoch) on_epoch(report.epochs.back());
  }
  return report;
}

ObjectiveValue Trainer::full_objective() const {
  const Temperature gamma(config_.gamma);
  std::vector<LabeledBatch> batches;
  for (std::size_t i = 0; i < data_.sources.size(); ++i)
    batches.push_back({i, data_.sources[i].unit_rows(), data_.sources[i].labels()});
  std::vector<std::size_t> all(data_.target.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Matrix target_z = data_.target.unit_rows();

  ObjectiveValue out;
  out.L_S = source_loss(bank_, encoder_, batches, gamma).value;
  out.L_T = target_loss(bank_, encoder_, target_z, pseudo_labels(all), gamma).value;
  out.L_W = wasserstein_term(bank_, encoder_, target_z, config_.wasserstein_options()).loss.value;
  out.total = out.L_S + config_.lambda_T * out.L_T + config_.effective_lambda_W() * out.L_W;
  return out;
}

TrainResult train(TrainingData data, const TrainConfig& config,
                  const std::function<void(const EpochReport&)>& on_epoch) {
  Trainer trainer(std::move(data), config);
  auto report = trainer.run(on_epoch);
  return TrainResult{trainer.bank(), std::move(report), trainer.optimizer()};
}

}  // namespace crpl
