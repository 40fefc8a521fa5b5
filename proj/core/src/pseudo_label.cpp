// SPDX-License-Identifier: Apache-2.0
#include "crpl/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crpl/error.hpp"

namespace crpl {

WeightMetric parse_weight_metric(std::string_view name) {
  if (name == "l2") return WeightMetric::L2;
  if (name == "cosine") return WeightMetric::Cosine;
  if (name == "uniform") return WeightMetric::Uniform;
  fail(ErrorCode::InvalidArgument, "unknown weight metric '" + std::string(name) + "'");
}

WeightSign parse_weight_sign(std::string_view name) {
  if (name == "softmin") return WeightSign::Softmin;
  if (name == "softmax_distance") return WeightSign::SoftmaxDistance;
  fail(ErrorCode::InvalidArgument, "unknown weight sign '" + std::string(name) + "'");
}

std::string_view to_string(WeightMetric metric) {
  switch (metric) {
    case WeightMetric::L2: return "l2";
    case WeightMetric::Cosine: return "cosine";
    case WeightMetric::Uniform: return "uniform";
  }
  return "l2";
}

std::string_view to_string(WeightSign sign) {
  return sign == WeightSign::Softmin ? "softmin" : "softmax_distance";
}

DomainClassWeights::DomainClassWeights(Matrix weights) : w_(std::move(weights)) {
  require(w_.rows() >= 1 && w_.cols() >= 1, ErrorCode::EmptyInput, "empty weight matrix");
  for (Eigen::Index k = 0; k < w_.cols(); ++k) {
    require((w_.col(k).array() >= 0.0).all(), ErrorCode::InvalidArgument,
            "domain weights must be nonnegative");
    require(std::abs(w_.col(k).sum() - 1.0) <= 1e-9, ErrorCode::InvalidArgument,
            "domain weights must sum to one per class");
  }
}

namespace {

std::vector<double> cosine_logits(const UnitEmbedding& z, const TextTable& table) {
  require(!table.empty(), ErrorCode::EmptyInput, "empty text table");
  std::vector<double> logits(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) logits[k] = cosine_similarity(z, table[k]);
  return logits;
}

std::size_t first_argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) -
                                  values.begin());
}

}  // namespace

SoftLabel zero_shot_probs(const UnitEmbedding& z, const TextTable& table, Temperature gamma) {
  return tempered_softmax(cosine_logits(z, table), gamma);
}

std::size_t zero_shot_predict(const UnitEmbedding& z, const TextTable& table, Temperature) {
  // The softmax is order preserving, so argmax over the raw similarities
  // avoids ties introduced by exp underflow at small gamma.
  return first_argmax(cosine_logits(z, table));
}

DomainClassWeights domain_class_weights(const RawEmbedding& z_pre, const CentroidTable& centroids,
                                        WeightMetric metric, WeightSign sign) {
  const auto n = centroids.num_domains();
  const auto num_classes = centroids.num_classes();
  require(n >= 1, ErrorCode::InvalidArgument, "at least one source domain is required");
  Matrix w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(num_classes));

  if (metric == WeightMetric::Uniform) {
    w.setConstant(1.0 / static_cast<double>(n));
    return DomainClassWeights(std::move(w));
  }

  const Vector z_unit = metric == WeightMetric::Cosine ? l2_normalize(z_pre).values() : Vector();
  const double direction = sign == WeightSign::Softmin ? -1.0 : 1.0;
  std::vector<double> scores(n);
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double distance = 0.0;
      if (metric == WeightMetric::L2) {
        const Vector& c = centroids.raw_mean(i, k);
        require(c.size() == z_pre.dim(), ErrorCode::DimensionMismatch, "centroid dimension");
        distance = (z_pre.values() - c).norm();
      } else {
        const UnitEmbedding c = l2_normalize(centroids.unit_mean(i, k));
        distance = 1.0 - std::clamp(z_unit.dot(c.values()), -1.0, 1.0);
      }
      scores[i] = direction * distance;
    }
    const auto column = tempered_softmax(scores, Temperature(1.0));
    for (std::size_t i = 0; i < n; ++i)
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = column[i];
  }
  return DomainClassWeights(std::move(w));
}

double enhanced_similarity(const UnitEmbedding& z, std::size_t k, const TextTable& base_table,
                           std::span<const TextTable> source_tables,
                           const DomainClassWeights& weights) {
  require(k < base_table.size(), ErrorCode::InvalidArgument, "class index out of range");
  require(source_tables.size() == weights.num_domains(), ErrorCode::DimensionMismatch,
          "one weight row per source table is required");
  double source_term = 0.0;
  for (std::size_t i = 0; i < source_tables.size(); ++i) {
    require(source_tables[i].size() == base_table.size(), ErrorCode::DimensionMismatch,
            "source table size differs from base table");
    source_term += weights(i, k) * cosine_similarity(z, source_tables[i][k]);
  }
  return 0.5 * cosine_similarity(z, base_table[k]) + 0.5 * source_term;
}

SoftLabel enhanced_pseudo_label(const UnitEmbedding& z, const RawEmbedding& z_pre,
                                const TextTable& base_table,
                                std::span<const TextTable> source_tables,
                                const CentroidTable& centroids, const PseudoLabelConfig& config) {
  const auto weights = domain_class_weights(z_pre, centroids, config.metric, config.sign);
  std::vector<double> logits(base_table.size());
  for (std::size_t k = 0; k < base_table.size(); ++k)
    logits[k] = enhanced_similarity(z, k, base_table, source_tables, weights);
  return tempered_softmax(logits, config.gamma);
}

std::vector<std::optional<std::size_t>> hard_threshold_labels(const DomainDataset& target,
                                                              const TextTable& base_table,
                                                              Temperature gamma, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
  std::vector<std::optional<std::size_t>> out;
  out.reserve(target.size());
  for (const auto& z : target.unit()) {
    const auto probs = zero_shot_probs(z, base_table, gamma);
    const auto best = first_argmax(probs);
    if (probs[best] >= alpha)
      out.emplace_back(zero_shot_predict(z, base_table, gamma));
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

}  // namespace crpl
