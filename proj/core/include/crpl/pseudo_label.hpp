// SPDX-License-Identifier: Apache-2.0
//
// Zero-shot scoring, distance-aware domain weighting and source-enhanced
// soft pseudo-labels for the target domain.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "crpl/embedding.hpp"

namespace crpl {

using SoftLabel = std::vector<double>;

enum class WeightMetric { L2, Cosine, Uniform };

/// Softmin weights closer domains higher. SoftmaxDistance weights by
/// exp(+distance), so farther domains dominate.
enum class WeightSign { Softmin, SoftmaxDistance };

WeightMetric parse_weight_metric(std::string_view name);
WeightSign parse_weight_sign(std::string_view name);
std::string_view to_string(WeightMetric metric);
std::string_view to_string(WeightSign sign);

/// N_sources x K matrix; each column is a distribution over source domains.
class DomainClassWeights {
 public:
  explicit DomainClassWeights(Matrix weights);

  const Matrix& matrix() const noexcept { return w_; }
  double operator()(std::size_t domain, std::size_t k) const {
    return w_(static_cast<Eigen::Index>(domain), static_cast<Eigen::Index>(k));
  }
  std::size_t num_domains() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  std::size_t num_classes() const noexcept { return static_cast<std::size_t>(w_.cols()); }

 private:
  Matrix w_;
};

SoftLabel zero_shot_probs(const UnitEmbedding& z, const TextTable& table, Temperature gamma);

/// argmax of zero_shot_probs; ties go to the smallest index.
std::size_t zero_shot_predict(const UnitEmbedding& z, const TextTable& table, Temperature gamma);

DomainClassWeights domain_class_weights(const RawEmbedding& z_pre, const CentroidTable& centroids,
                                        WeightMetric metric, WeightSign sign);

/// 1/2 cos(z, base_k) + 1/2 sum_i w[i][k] cos(z, source_i_k).
double enhanced_similarity(const UnitEmbedding& z, std::size_t k, const TextTable& base_table,
                           std::span<const TextTable> source_tables,
                           const DomainClassWeights& weights);

struct PseudoLabelConfig {
  Temperature gamma{0.01};
  WeightMetric metric = WeightMetric::L2;
  WeightSign sign = WeightSign::Softmin;
};

SoftLabel enhanced_pseudo_label(const UnitEmbedding& z, const RawEmbedding& z_pre,
                                const TextTable& base_table,
                                std::span<const TextTable> source_tables,
                                const CentroidTable& centroids, const PseudoLabelConfig& config);

/// Hard zero-shot labels kept only when the top probability reaches alpha.
std::vector<std::optional<std::size_t>> hard_threshold_labels(const DomainDataset& target,
                                                              const TextTable& base_table,
                                                              Temperature gamma, double alpha);

}  // namespace crpl
