// SPDX-License-Identifier: Apache-2.0
#include "crpl/losses.hpp"

#include <cmath>

#include "crpl/error.hpp"

namespace crpl {

namespace {

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    const double lse = peak + std::log((logits.row(r).array() - peak).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

struct SoftCrossEntropy {
  double value;
  Matrix table_grad;  // dL / d table, K x d
};

// L = -(1/B) sum_j sum_k y_jk log softmax(z_j . T^T / gamma)_k
SoftCrossEntropy soft_cross_entropy(const Matrix& z, const Matrix& table, const Matrix& targets,
                                    Temperature gamma) {
  const double batch = static_cast<double>(z.rows());
  const Matrix log_p = log_softmax_rows(z * table.transpose() / gamma.value());
  const double value = -(targets.cwiseProduct(log_p)).sum() / batch;
  const Vector mass = targets.rowwise().sum();
  const Matrix d_logits =
      (log_p.array().exp().colwise() * mass.array() - targets.array()).matrix() / batch;
  return {value, d_logits.transpose() * z / gamma.value()};
}

}  // namespace

Matrix class_probabilities(const Matrix& z, const Matrix& table, Temperature gamma) {
  require(z.cols() == table.cols(), ErrorCode::DimensionMismatch,
          "visual and text embeddings differ in dimension");
  return log_softmax_rows(z * table.transpose() / gamma.value()).array().exp().matrix();
}

LossAndGradient source_loss(const PromptBank& bank, const TextEncoder& encoder,
                            std::span<const LabeledBatch> batches, Temperature gamma) {
  require(!batches.empty(), ErrorCode::EmptyInput, "source_loss needs at least one batch");
  LossAndGradient out{0.0, LearnablePrompts::zeros(bank.shape())};
  const double weight = 1.0 / static_cast<double>(batches.size());
  const auto classes = static_cast<Eigen::Index>(bank.num_classes());
  for (const auto& batch : batches) {
    require(batch.z.rows() > 0 && static_cast<std::size_t>(batch.z.rows()) == batch.labels.size(),
            ErrorCode::DimensionMismatch, "source batch needs one label per sample");
    const Owner owner = Owner::source(batch.domain);
    const Matrix table = to_matrix(text_embedding_table(bank, encoder, owner));
    Matrix one_hot = Matrix::Zero(batch.z.rows(), classes);
    for (std::size_t j = 0; j < batch.labels.size(); ++j) {
      require(batch.labels[j] < bank.num_classes(), ErrorCode::InvalidArgument,
              "label out of range");
      one_hot(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(batch.labels[j])) = 1.0;
    }
    const auto ce = soft_cross_entropy(batch.z, table, one_hot, gamma);
    out.value += weight * ce.value;
    backprop_table(bank, encoder, owner, weight * ce.table_grad, out.grad);
  }
  return out;
}

LossAndGradient target_loss(const PromptBank& bank, const TextEncoder& encoder, const Matrix& z,
                            const Matrix& soft_labels, Temperature gamma) {
  require(z.rows() > 0, ErrorCode::EmptyInput, "empty target batch");
  require(soft_labels.rows() == z.rows() &&
              static_cast<std::size_t>(soft_labels.cols()) == bank.num_classes(),
          ErrorCode::DimensionMismatch, "soft labels must be B x K");
  const Matrix table = to_matrix(text_embedding_table(bank, encoder, Owner::target()));
  const auto ce = soft_cross_entropy(z, table, soft_labels, gamma);
  LossAndGradient out{ce.value, LearnablePrompts::zeros(bank.shape())};
  backprop_table(bank, encoder, Owner::target(), ce.table_grad, out.grad);
  return out;
}

WassersteinTerm wasserstein_term(const PromptBank& bank, const TextEncoder& encoder,
                                 const Matrix& z, const WassersteinOptions& options) {
  const Matrix taus = to_matrix(text_embedding_table(bank, encoder, Owner::target()));
  WassersteinTerm out;
  out.transport = wasserstein_loss(taus, z, Vector(), options);
  out.loss.value = out.transport.value;
  out.loss.grad = LearnablePrompts::zeros(bank.shape());
  backprop_table(bank, encoder, Owner::target(), wasserstein_grad_taus(out.transport.plan, z),
                 out.loss.grad);
  return out;
}

}  // namespace crpl
