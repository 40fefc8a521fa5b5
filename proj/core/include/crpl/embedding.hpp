// SPDX-License-Identifier: Apache-2.0
//
// Vector-space primitives shared by every other module: raw and unit-norm
// embeddings, cosine scoring, tempered softmax and per-domain class centroids.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace crpl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kZeroNormThreshold = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-9;

/// A pre-normalization feature vector (z^pre). Entries must be finite.
class RawEmbedding {
 public:
  explicit RawEmbedding(Vector values);

  const Vector& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }

 private:
  Vector values_;
};

/// A point on the unit hypersphere. Construction checks | ||v|| - 1 | <= 1e-9.
class UnitEmbedding {
 public:
  explicit UnitEmbedding(Vector values);

  const Vector& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }

 private:
  Vector values_;
};

using TextTable = std::vector<UnitEmbedding>;

class Temperature {
 public:
  explicit Temperature(double gamma);

  double value() const noexcept { return gamma_; }

 private:
  double gamma_;
};

UnitEmbedding l2_normalize(const Vector& v);
UnitEmbedding l2_normalize(const RawEmbedding& v);

/// Dot product of two unit vectors clamped to [-1, 1].
double cosine_similarity(const UnitEmbedding& a, const UnitEmbedding& b);

/// softmax(logits / gamma), max-shifted.
std::vector<double> tempered_softmax(std::span<const double> logits, Temperature gamma);

/// One domain's frozen visual embeddings. Sources carry labels, the target
/// never does; held-out target labels live outside this type.
class DomainDataset {
 public:
  static DomainDataset labeled(std::string name, std::vector<RawEmbedding> raw,
                               std::vector<std::size_t> labels, std::size_t num_classes);
  static DomainDataset unlabeled(std::string name, std::vector<RawEmbedding> raw);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return raw_.size(); }
  Eigen::Index dim() const noexcept { return dim_; }
  bool is_labeled() const noexcept { return labels_.has_value(); }

  const std::vector<RawEmbedding>& raw() const noexcept { return raw_; }
  const std::vector<UnitEmbedding>& unit() const noexcept { return unit_; }
  /// Throws InvalidArgument on an unlabeled domain.
  const std::vector<std::size_t>& labels() const;

  /// Unit embeddings of the given samples as rows of a matrix.
  Matrix unit_rows(std::span<const std::size_t> indices) const;
  Matrix unit_rows() const;

 private:
  DomainDataset(std::string name, std::vector<RawEmbedding> raw,
                std::optional<std::vector<std::size_t>> labels);

  std::string name_;
  Eigen::Index dim_ = 0;
  std::vector<RawEmbedding> raw_;
  std::vector<UnitEmbedding> unit_;
  std::optional<std::vector<std::size_t>> labels_;
};

/// Class centroids c^i_k per source domain. Two means are kept: over raw
/// embeddings (used by the l2 weighting) and over unit embeddings (used by
/// the cosine weighting). A cell is absent when the domain has no sample of
/// that class.
class CentroidTable {
 public:
  CentroidTable(std::size_t num_domains, std::size_t num_classes);

  std::size_t num_domains() const noexcept { return domains_; }
  std::size_t num_classes() const noexcept { return classes_; }

  bool has(std::size_t domain, std::size_t k) const;
  /// Throws MissingCentroid for an absent cell.
  const Vector& raw_mean(std::size_t domain, std::size_t k) const;
  const Vector& unit_mean(std::size_t domain, std::size_t k) const;

  void set(std::size_t domain, std::size_t k, Vector raw_mean, Vector unit_mean);

 private:
  std::size_t index(std::size_t domain, std::size_t k) const;

  std::size_t domains_;
  std::size_t classes_;
  std::vector<std::optional<Vector>> raw_;
  std::vector<std::optional<Vector>> unit_;
};

CentroidTable compute_centroids(std::span<const DomainDataset> sources, std::size_t num_classes);

/// Rows of the returned matrix are the table's embeddings.
Matrix to_matrix(const TextTable& table);

}  // namespace crpl
