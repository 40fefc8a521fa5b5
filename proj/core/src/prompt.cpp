// SPDX-License-Identifier: Apache-2.0
#include "crpl/prompt.hpp"

#include "crpl/error.hpp"
#include "crpl/random.hpp"

namespace crpl {

namespace {

constexpr std::uint64_t kEncoderStream = 0x656e63;  // "enc"
constexpr std::uint64_t kPromptStream = 0x707274;   // "prt"
constexpr double kEncoderBiasStd = 0.02;

}  // namespace

LearnablePrompts LearnablePrompts::zeros(const PromptShape& shape) {
  const auto dtok = static_cast<Eigen::Index>(shape.token_dim);
  LearnablePrompts out;
  out.shared.assign(shape.num_classes,
                    Matrix::Zero(static_cast<Eigen::Index>(shape.shared_length), dtok));
  out.sources.assign(shape.num_sources,
                     Matrix::Zero(static_cast<Eigen::Index>(shape.domain_length), dtok));
  out.target = Matrix::Zero(static_cast<Eigen::Index>(shape.domain_length), dtok);
  return out;
}

LearnablePrompts LearnablePrompts::zeros_like() const {
  LearnablePrompts out = *this;
  out.for_each_block([](Matrix& m) { m.setZero(); });
  return out;
}

void LearnablePrompts::add_scaled(const LearnablePrompts& other, double s) {
  require(shared.size() == other.shared.size() && sources.size() == other.sources.size(),
          ErrorCode::DimensionMismatch, "prompt layouts differ");
  for (std::size_t k = 0; k < shared.size(); ++k) shared[k] += s * other.shared[k];
  for (std::size_t i = 0; i < sources.size(); ++i) sources[i] += s * other.sources[i];
  target += s * other.target;
}

void LearnablePrompts::scale(double factor) {
  for_each_block([factor](Matrix& m) { m *= factor; });
}

bool LearnablePrompts::all_finite() const {
  bool ok = true;
  for_each_block([&ok](const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

double LearnablePrompts::squared_norm() const {
  double total = 0.0;
  for_each_block([&total](const Matrix& m) { total += m.squaredNorm(); });
  return total;
}

std::size_t LearnablePrompts::parameter_count() const {
  std::size_t total = 0;
  for_each_block([&total](const Matrix& m) { total += static_cast<std::size_t>(m.size()); });
  return total;
}

PromptBank::PromptBank(LearnablePrompts learnable, Matrix class_tokens, Matrix base_context)
    : learnable_(std::move(learnable)),
      class_tokens_(std::move(class_tokens)),
      base_context_(std::move(base_context)) {
  const auto dtok = class_tokens_.cols();
  require(class_tokens_.rows() >= 1 && dtok >= 1, ErrorCode::EmptyInput, "no class tokens");
  require(static_cast<std::size_t>(class_tokens_.rows()) == learnable_.shared.size(),
          ErrorCode::DimensionMismatch, "one shared prompt block per class is required");
  require(!learnable_.sources.empty(), ErrorCode::InvalidArgument,
          "at least one source prompt is required");
  require(base_context_.cols() == dtok, ErrorCode::DimensionMismatch,
          "base context token dimension differs");
  const auto m1 = learnable_.shared.front().rows();
  const auto m2 = learnable_.target.rows();
  require(m1 >= 1 && m2 >= 1, ErrorCode::InvalidArgument, "prompt lengths must be >= 1");
  for (const auto& block : learnable_.shared)
    require(block.rows() == m1 && block.cols() == dtok, ErrorCode::DimensionMismatch,
            "shared prompt block shape differs");
  for (const auto& block : learnable_.sources)
    require(block.rows() == m2 && block.cols() == dtok, ErrorCode::DimensionMismatch,
            "source prompt block shape differs");
  require(learnable_.target.cols() == dtok, ErrorCode::DimensionMismatch,
          "target prompt token dimension differs");
}

PromptBank PromptBank::initialize(const PromptShape& shape, Matrix class_tokens,
                                  Matrix base_context, std::uint64_t seed, double init_std) {
  require(shape.num_classes == static_cast<std::size_t>(class_tokens.rows()) &&
              shape.token_dim == static_cast<std::size_t>(class_tokens.cols()),
          ErrorCode::DimensionMismatch, "class tokens do not match the prompt shape");
  Rng rng = make_rng(seed, kPromptStream);
  const auto dtok = static_cast<Eigen::Index>(shape.token_dim);
  LearnablePrompts learnable;
  for (std::size_t k = 0; k < shape.num_classes; ++k)
    learnable.shared.push_back(
        gaussian_matrix(rng, static_cast<Eigen::Index>(shape.shared_length), dtok, init_std));
  for (std::size_t i = 0; i < shape.num_sources; ++i)
    learnable.sources.push_back(
        gaussian_matrix(rng, static_cast<Eigen::Index>(shape.domain_length), dtok, init_std));
  learnable.target =
      gaussian_matrix(rng, static_cast<Eigen::Index>(shape.domain_length), dtok, init_std);
  return PromptBank(std::move(learnable), std::move(class_tokens), std::move(base_context));
}

PromptShape PromptBank::shape() const {
  return PromptShape{num_classes(), num_sources(),
                     static_cast<std::size_t>(learnable_.shared.front().rows()),
                     static_cast<std::size_t>(learnable_.target.rows()), token_dim()};
}

void PromptBank::validate_owner(const Owner& owner) const {
  if (owner.kind == Owner::Kind::Source && owner.index >= num_sources())
    fail(ErrorCode::UnknownOwner, "source domain index out of range");
}

Matrix compose_prompt(const PromptBank& bank, std::size_t k, const Owner& owner) {
  bank.validate_owner(owner);
  require(k < bank.num_classes(), ErrorCode::InvalidArgument, "class index out of range");
  const auto dtok = static_cast<Eigen::Index>(bank.token_dim());
  const Matrix& class_token = bank.class_tokens();

  if (owner.kind == Owner::Kind::Base) {
    const auto ctx = bank.base_context().rows();
    Matrix seq(ctx + 1, dtok);
    seq.topRows(ctx) = bank.base_context();
    seq.row(ctx) = class_token.row(static_cast<Eigen::Index>(k));
    return seq;
  }

  const Matrix& shared = bank.learnable().shared[k];
  const Matrix& domain = owner.kind == Owner::Kind::Target
                             ? bank.learnable().target
                             : bank.learnable().sources[owner.index];
  Matrix seq(shared.rows() + domain.rows() + 1, dtok);
  seq.topRows(shared.rows()) = shared;
  seq.middleRows(shared.rows(), domain.rows()) = domain;
  seq.row(seq.rows() - 1) = class_token.row(static_cast<Eigen::Index>(k));
  return seq;
}

void scatter_prompt_gradient(const PromptBank& bank, std::size_t k, const Owner& owner,
                             const Matrix& token_grad, LearnablePrompts& grad) {
  bank.validate_owner(owner);
  if (owner.kind == Owner::Kind::Base) return;
  const auto m1 = grad.shared[k].rows();
  Matrix& domain = owner.kind == Owner::Kind::Target ? grad.target : grad.sources[owner.index];
  require(token_grad.rows() == m1 + domain.rows() + 1, ErrorCode::DimensionMismatch,
          "token gradient length does not match the composed prompt");
  grad.shared[k] += token_grad.topRows(m1);
  domain += token_grad.middleRows(m1, domain.rows());
}

TextEncoder::TextEncoder(std::size_t token_dim, std::size_t hidden_dim, std::size_t embed_dim,
                         std::uint64_t seed)
    : seed_(seed) {
  require(token_dim >= 1 && hidden_dim >= 1 && embed_dim >= 1, ErrorCode::InvalidArgument,
          "encoder widths must be positive");
  Rng rng = make_rng(seed, kEncoderStream);
  w1_ = random_orthogonal(rng, static_cast<Eigen::Index>(hidden_dim),
                          static_cast<Eigen::Index>(token_dim));
  b1_ = gaussian_vector(rng, static_cast<Eigen::Index>(hidden_dim), kEncoderBiasStd);
  w2_ = random_orthogonal(rng, static_cast<Eigen::Index>(embed_dim),
                          static_cast<Eigen::Index>(hidden_dim));
  b2_ = gaussian_vector(rng, static_cast<Eigen::Index>(embed_dim), kEncoderBiasStd);
}

TextEncoder::Trace TextEncoder::forward(const Matrix& sequence) const {
  require(sequence.rows() > 0, ErrorCode::EmptySequence, "cannot encode an empty sequence");
  require(sequence.cols() == w1_.cols(), ErrorCode::DimensionMismatch,
          "token dimension does not match the encoder");
  Trace t;
  t.pooled = sequence.colwise().mean().transpose();
  t.hidden = (w1_ * t.pooled + b1_).array().tanh().matrix();
  t.output = (w2_ * t.hidden + b2_).array().tanh().matrix();
  return t;
}

UnitEmbedding TextEncoder::encode(const Matrix& sequence) const {
  return l2_normalize(forward(sequence).output);
}

Matrix TextEncoder::encode_backward(const Matrix& sequence, const Vector& upstream) const {
  const Trace t = forward(sequence);
  require(upstream.size() == t.output.size(), ErrorCode::DimensionMismatch,
          "upstream gradient dimension differs from the embedding");
  const double norm = t.output.norm();
  require(norm > kZeroNormThreshold, ErrorCode::ZeroVector, "encoder output vanished");
  const Vector unit = t.output / norm;
  // d(o/|o|)^T g = (g - u u^T g) / |o|
  const Vector g_out = (upstream - unit * unit.dot(upstream)) / norm;
  const Vector g_a2 = g_out.cwiseProduct((1.0 - t.output.array().square()).matrix());
  const Vector g_hidden = w2_.transpose() * g_a2;
  const Vector g_a1 = g_hidden.cwiseProduct((1.0 - t.hidden.array().square()).matrix());
  const Vector g_pooled = w1_.transpose() * g_a1;
  const double inv_len = 1.0 / static_cast<double>(sequence.rows());
  return (g_pooled * inv_len).transpose().replicate(sequence.rows(), 1);
}

TextTable text_embedding_table(const PromptBank& bank, const TextEncoder& encoder,
                               const Owner& owner) {
  bank.validate_owner(owner);
  TextTable table;
  table.reserve(bank.num_classes());
  for (std::size_t k = 0; k < bank.num_classes(); ++k)
    table.push_back(encoder.encode(compose_prompt(bank, k, owner)));
  return table;
}

void backprop_table(const PromptBank& bank, const TextEncoder& encoder, const Owner& owner,
                    const Matrix& upstream, LearnablePrompts& grad) {
  require(static_cast<std::size_t>(upstream.rows()) == bank.num_classes(),
          ErrorCode::DimensionMismatch, "one upstream row per class is required");
  if (owner.kind == Owner::Kind::Base) return;
  for (std::size_t k = 0; k < bank.num_classes(); ++k) {
    const Vector g = upstream.row(static_cast<Eigen::Index>(k)).transpose();
    if (g.isZero(0.0)) continue;
    const Matrix seq = compose_prompt(bank, k, owner);
    scatter_prompt_gradient(bank, k, owner, encoder.encode_backward(seq, g), grad);
  }
}

TextTable base_text_table(const TextEncoder& encoder, const Matrix& class_tokens,
                          const Matrix& base_context) {
  require(class_tokens.cols() == base_context.cols(), ErrorCode::DimensionMismatch,
          "class tokens and base context differ in token dimension");
  TextTable table;
  Matrix seq(base_context.rows() + 1, base_context.cols());
  seq.topRows(base_context.rows()) = base_context;
  for (Eigen::Index k = 0; k < class_tokens.rows(); ++k) {
    seq.row(base_context.rows()) = class_tokens.row(k);
    table.push_back(encoder.encode(seq));
  }
  return table;
}

}  // namespace crpl
