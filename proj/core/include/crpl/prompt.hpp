// SPDX-License-Identifier: Apache-2.0
//
// Learnable prompt parameterization and the frozen toy text encoder.
//
// A prompt for class k owned by a domain is the token sequence
//   [shared_k (M1 tokens)][domain (M2 tokens)][class_k]
// and the base prompt is [base context][class_k]. Token sequences are
// matrices with one token per row.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "crpl/embedding.hpp"

namespace crpl {

/// Who owns the domain-specific block of a composed prompt.
struct Owner {
  enum class Kind { Source, Target, Base };

  Kind kind = Kind::Base;
  std::size_t index = 0;  // source domain index, only meaningful for Source

  static Owner source(std::size_t i) { return {Kind::Source, i}; }
  static Owner target() { return {Kind::Target, 0}; }
  static Owner base() { return {Kind::Base, 0}; }

  friend bool operator==(const Owner&, const Owner&) = default;
};

struct PromptShape {
  std::size_t num_classes = 0;
  std::size_t num_sources = 1;
  std::size_t shared_length = 16;  // M1
  std::size_t domain_length = 16;  // M2
  std::size_t token_dim = 0;
};

/// Every learnable token block. The same layout doubles as a gradient and
/// as a momentum buffer so optimizer code can treat them uniformly.
struct LearnablePrompts {
  std::vector<Matrix> shared;   // K blocks of M1 x d_tok
  std::vector<Matrix> sources;  // N blocks of M2 x d_tok
  Matrix target;                // M2 x d_tok

  static LearnablePrompts zeros(const PromptShape& shape);

  LearnablePrompts zeros_like() const;
  void add_scaled(const LearnablePrompts& other, double scale);
  void scale(double factor);
  bool all_finite() const;
  double squared_norm() const;
  std::size_t parameter_count() const;

  /// Visit (block, coordinate) views in a fixed order: shared, sources, target.
  template <typename F>
  void for_each_block(F&& f) {
    for (auto& m : shared) f(m);
    for (auto& m : sources) f(m);
    f(target);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    for (const auto& m : shared) f(m);
    for (const auto& m : sources) f(m);
    f(target);
  }
};

class PromptBank {
 public:
  PromptBank(LearnablePrompts learnable, Matrix class_tokens, Matrix base_context);

  /// Learnable tokens drawn i.i.d. N(0, init_std^2) from `seed`.
  static PromptBank initialize(const PromptShape& shape, Matrix class_tokens, Matrix base_context,
                               std::uint64_t seed, double init_std = 0.02);

  PromptShape shape() const;
  std::size_t num_classes() const noexcept { return learnable_.shared.size(); }
  std::size_t num_sources() const noexcept { return learnable_.sources.size(); }
  std::size_t token_dim() const noexcept { return static_cast<std::size_t>(class_tokens_.cols()); }
  std::size_t base_length() const noexcept { return static_cast<std::size_t>(base_context_.rows()); }

  const LearnablePrompts& learnable() const noexcept { return learnable_; }
  LearnablePrompts& learnable() noexcept { return learnable_; }
  const Matrix& class_tokens() const noexcept { return class_tokens_; }
  const Matrix& base_context() const noexcept { return base_context_; }

  void validate_owner(const Owner& owner) const;

 private:
  LearnablePrompts learnable_;
  Matrix class_tokens_;  // K x d_tok, frozen
  Matrix base_context_;  // base_length x d_tok, frozen
};

Matrix compose_prompt(const PromptBank& bank, std::size_t k, const Owner& owner);

/// Route per-token gradients of compose_prompt(bank, k, owner) into `grad`.
/// Frozen rows (class token, base context) are dropped.
void scatter_prompt_gradient(const PromptBank& bank, std::size_t k, const Owner& owner,
                             const Matrix& token_grad, LearnablePrompts& grad);

/// Mean-pool -> affine+tanh -> affine+tanh -> L2 normalize. All parameters
/// are frozen and generated from the seed.
class TextEncoder {
 public:
  TextEncoder(std::size_t token_dim, std::size_t hidden_dim, std::size_t embed_dim,
              std::uint64_t seed);

  std::size_t token_dim() const noexcept { return static_cast<std::size_t>(w1_.cols()); }
  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(w1_.rows()); }
  std::size_t embed_dim() const noexcept { return static_cast<std::size_t>(w2_.rows()); }
  std::uint64_t seed() const noexcept { return seed_; }

  const Matrix& w1() const noexcept { return w1_; }
  const Vector& b1() const noexcept { return b1_; }
  const Matrix& w2() const noexcept { return w2_; }
  const Vector& b2() const noexcept { return b2_; }

  UnitEmbedding encode(const Matrix& sequence) const;

  /// Reverse-mode gradient of <upstream, encode(sequence)> with respect to
  /// every token of the sequence (rows of the result).
  Matrix encode_backward(const Matrix& sequence, const Vector& upstream) const;

 private:
  struct Trace {
    Vector pooled;
    Vector hidden;  // tanh(W1 pooled + b1)
    Vector output;  // tanh(W2 hidden + b2), before normalization
  };
  Trace forward(const Matrix& sequence) const;

  std::uint64_t seed_;
  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
};

TextTable text_embedding_table(const PromptBank& bank, const TextEncoder& encoder,
                               const Owner& owner);

/// Base table straight from the frozen tokens, without learnable prompts.
TextTable base_text_table(const TextEncoder& encoder, const Matrix& class_tokens,
                          const Matrix& base_context);

/// Accumulate the token gradients of sum_k <upstream.row(k), table[k]> for
/// the table of `owner` into `grad`.
void backprop_table(const PromptBank& bank, const TextEncoder& encoder, const Owner& owner,
                    const Matrix& upstream, LearnablePrompts& grad);

}  // namespace crpl
