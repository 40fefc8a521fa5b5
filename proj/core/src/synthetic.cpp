// SPDX-License-Identifier: Apache-2.0
#include "crpl/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "crpl/error.hpp"
#include "crpl/prompt.hpp"
#include "crpl/random.hpp"

namespace crpl {

namespace {

constexpr std::uint64_t kPrototypeStream = 0x70726f;  // "pro"
constexpr std::uint64_t kRotationStream = 0x726f7400;
constexpr std::uint64_t kSampleStream = 0x736d7000;
constexpr std::uint64_t kBaseStream = 0x626173;    // "bas"
constexpr std::uint64_t kVerifyStream = 0x766572;  // "ver"
constexpr double kBaseContextStd = 0.02;
constexpr double kFitScale = 0.5;
constexpr double kTanhClamp = 0.999;

Matrix quantize(Matrix m) {
  return m.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

struct Plane {
  Vector u;
  Vector v;
};

Plane random_plane(std::uint64_t seed, std::size_t domain, Eigen::Index d) {
  Rng rng = make_rng(seed, kRotationStream + domain);
  const Matrix q = random_orthogonal(rng, d, 2);
  return {q.col(0), q.col(1)};
}

/// Balanced labels (sample j has class j mod K) and quantized raw embeddings.
Matrix sample_domain(const Matrix& prototypes, const SyntheticSpec& spec, Rng& rng,
                     std::vector<std::size_t>& labels) {
  const auto n = static_cast<Eigen::Index>(spec.samples_per_domain);
  const auto K = static_cast<std::size_t>(prototypes.rows());
  Matrix raw(n, prototypes.cols());
  labels.resize(spec.samples_per_domain);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t k = static_cast<std::size_t>(j) % K;
    labels[static_cast<std::size_t>(j)] = k;
    raw.row(j) = spec.radius * prototypes.row(static_cast<Eigen::Index>(k)) +
                 gaussian_vector(rng, prototypes.cols(), spec.noise_sigma).transpose();
  }
  return quantize(std::move(raw));
}

std::vector<RawEmbedding> rows_of(const Matrix& m) {
  std::vector<RawEmbedding> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).transpose());
  return out;
}

Vector atanh_clamped(const Vector& x) {
  return x.unaryExpr([](double v) { return std::atanh(std::clamp(v, -kTanhClamp, kTanhClamp)); });
}

/// Pooled token vector m with encode(m) close to the direction of `target`,
/// solved layer by layer: tanh is inverted exactly and each affine map by
/// minimum-norm least squares.
Vector invert_encoder(const TextEncoder& enc, const Vector& target) {
  const Vector a2 = atanh_clamped(kFitScale * target);
  const Vector h = enc.w2().completeOrthogonalDecomposition().solve(a2 - enc.b2());
  const Vector a1 = atanh_clamped(h);
  return enc.w1().completeOrthogonalDecomposition().solve(a1 - enc.b1());
}

}  // namespace

void SyntheticSpec::validate() const {
  require(num_classes >= 2, ErrorCode::InvalidArgument, "K must be at least 2");
  require(dim >= 4, ErrorCode::InvalidArgument, "d must be at least 4");
  require(n_sources >= 1, ErrorCode::InvalidArgument, "at least one source domain is required");
  require(samples_per_domain > 0 && samples_per_domain % num_classes == 0,
          ErrorCode::InvalidArgument, "samples_per_domain must be a positive multiple of K");
  require(std::isfinite(domain_rotation_deg), ErrorCode::InvalidArgument,
          "rotation must be finite");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorCode::InvalidArgument,
          "noise_sigma must be non-negative");
  require(radius > 0.0 && std::isfinite(radius), ErrorCode::InvalidArgument,
          "radius must be positive");
  require(base_length >= 1, ErrorCode::InvalidArgument, "base context needs at least one token");
  require(fit_threshold >= 0.0 && fit_threshold <= 100.0, ErrorCode::InvalidArgument,
          "fit_threshold must be a percentage");
}

Vector rotate_in_plane(const Vector& x, const Vector& u, const Vector& v, double radians) {
  const double a = u.dot(x);
  const double b = v.dot(x);
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  return x + (a * c - b * s - a) * u + (a * s + b * c - b) * v;
}

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto K = static_cast<Eigen::Index>(spec.num_classes);
  const double radians = spec.domain_rotation_deg * std::numbers::pi / 180.0;

  Rng proto_rng = make_rng(spec.seed, kPrototypeStream);
  Matrix prototypes = gaussian_matrix(proto_rng, K, d, 1.0);
  prototypes.rowwise().normalize();

  const std::size_t n_domains = spec.n_sources + 1;
  std::vector<DomainDataset> sources;
  std::optional<DomainDataset> target;
  std::vector<std::size_t> target_labels;
  for (std::size_t i = 0; i < n_domains; ++i) {
    const Plane plane = random_plane(spec.seed, i, d);
    Matrix rotated(K, d);
    for (Eigen::Index k = 0; k < K; ++k)
      rotated.row(k) =
          rotate_in_plane(prototypes.row(k).transpose(), plane.u, plane.v, radians).transpose();
    Rng rng = make_rng(spec.seed, kSampleStream + i);
    std::vector<std::size_t> labels;
    const Matrix raw = sample_domain(rotated, spec, rng, labels);
    if (i < spec.n_sources) {
      sources.push_back(DomainDataset::labeled("source_" + std::to_string(i), rows_of(raw),
                                               std::move(labels), spec.num_classes));
    } else {
      target = DomainDataset::unlabeled("target", rows_of(raw));
      target_labels = std::move(labels);
    }
  }

  TextInit text;
  text.encoder_seed = spec.seed;
  text.token_dim = spec.token_dim == 0 ? spec.dim : spec.token_dim;
  text.hidden_dim = spec.hidden_dim == 0 ? spec.dim : spec.hidden_dim;
  const auto dtok = static_cast<Eigen::Index>(text.token_dim);
  Rng base_rng = make_rng(spec.seed, kBaseStream);
  text.base_context =
      quantize(gaussian_matrix(base_rng, static_cast<Eigen::Index>(spec.base_length), dtok,
                               kBaseContextStd));

  // The base prompt mean-pools base_length context tokens plus the class
  // token, so class_k = L * m_k - sum(context) makes the pooled input m_k.
  const TextEncoder encoder(text.token_dim, text.hidden_dim, spec.dim, text.encoder_seed);
  const double length = static_cast<double>(spec.base_length + 1);
  const Vector context_sum = text.base_context.colwise().sum().transpose();
  Matrix classes(K, dtok);
  for (Eigen::Index k = 0; k < K; ++k)
    classes.row(k) =
        (length * invert_encoder(encoder, prototypes.row(k).transpose()) - context_sum)
            .transpose();
  text.class_tokens = quantize(std::move(classes));

  const TextTable base_table = base_text_table(encoder, text.class_tokens, text.base_context);

  Rng verify_rng = make_rng(spec.seed, kVerifyStream);
  std::vector<std::size_t> verify_labels;
  const Matrix verify_raw = sample_domain(prototypes, spec, verify_rng, verify_labels);
  std::size_t correct = 0;
  for (Eigen::Index j = 0; j < verify_raw.rows(); ++j) {
    const UnitEmbedding z = l2_normalize(Vector(verify_raw.row(j).transpose()));
    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t k = 0; k < base_table.size(); ++k) {
      const double s = cosine_similarity(z, base_table[k]);
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    if (best == verify_labels[static_cast<std::size_t>(j)]) ++correct;
  }
  const double fit_accuracy =
      100.0 * static_cast<double>(correct) / static_cast<double>(verify_raw.rows());
  if (fit_accuracy < spec.fit_threshold)
    fail(ErrorCode::SeedFitFailure,
         "base table reaches " + std::to_string(fit_accuracy) +
             "% on the unrotated verification domain for seed " + std::to_string(spec.seed) +
             "; regenerate with the next seed");

  return SyntheticBenchmark{
      DatasetBundle{std::move(sources), std::move(*target), std::move(target_labels),
                    std::move(text)},
      std::move(prototypes), fit_accuracy};
}

}  // namespace crpl
