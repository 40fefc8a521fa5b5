// SPDX-License-Identifier: Apache-2.0
//
// The three training objectives and their gradients with respect to every
// learnable prompt token.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crpl/embedding.hpp"
#include "crpl/prompt.hpp"
#include "crpl/transport.hpp"

namespace crpl {

/// Unit visual embeddings (rows) of one source domain with their labels.
struct LabeledBatch {
  std::size_t domain = 0;
  Matrix z;
  std::vector<std::size_t> labels;
};

struct LossAndGradient {
  double value = 0.0;
  LearnablePrompts grad;
};

/// Row j of the result is P(y | z_j) under `table`: a tempered softmax of
/// the cosines.
Matrix class_probabilities(const Matrix& z, const Matrix& table, Temperature gamma);

/// Mean over domains of the per-domain mean cross-entropy. Gradients reach
/// the shared blocks and each batch's own source block only.
LossAndGradient source_loss(const PromptBank& bank, const TextEncoder& encoder,
                            std::span<const LabeledBatch> batches, Temperature gamma);

/// Soft cross-entropy -(1/B) sum_j sum_k y_jk log P(k | z_j) against the
/// target table. Labels are constants. A row of all zeros drops that sample
/// from the sum while keeping 1/B normalization (the thresholded hard-label
/// baseline uses this).
LossAndGradient target_loss(const PromptBank& bank, const TextEncoder& encoder, const Matrix& z,
                            const Matrix& soft_labels, Temperature gamma);

struct WassersteinTerm {
  LossAndGradient loss;
  WassersteinResult transport;
};

/// Transport cost between the target text table (uniform pi) and the batch,
/// with the fixed-plan gradient pushed through the encoder.
WassersteinTerm wasserstein_term(const PromptBank& bank, const TextEncoder& encoder,
                                 const Matrix& z, const WassersteinOptions& options);

}  // namespace crpl
