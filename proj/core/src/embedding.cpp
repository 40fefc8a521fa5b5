// SPDX-License-Identifier: Apache-2.0
#include "crpl/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "crpl/error.hpp"

namespace crpl {

RawEmbedding::RawEmbedding(Vector values) : values_(std::move(values)) {
  require(values_.size() > 0, ErrorCode::EmptyInput, "raw embedding has no entries");
  require(values_.allFinite(), ErrorCode::InvalidArgument, "raw embedding has non-finite entries");
}

UnitEmbedding::UnitEmbedding(Vector values) : values_(std::move(values)) {
  require(values_.size() > 0, ErrorCode::EmptyInput, "unit embedding has no entries");
  require(std::abs(values_.norm() - 1.0) <= kUnitNormTolerance, ErrorCode::InvalidArgument,
          "unit embedding is not unit-norm");
}

Temperature::Temperature(double gamma) : gamma_(gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), ErrorCode::InvalidArgument,
          "temperature must be positive");
}

UnitEmbedding l2_normalize(const Vector& v) {
  const double norm = v.norm();
  require(norm > kZeroNormThreshold, ErrorCode::ZeroVector, "cannot normalize a zero vector");
  return UnitEmbedding(v / norm);
}

UnitEmbedding l2_normalize(const RawEmbedding& v) { return l2_normalize(v.values()); }

double cosine_similarity(const UnitEmbedding& a, const UnitEmbedding& b) {
  require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "cosine_similarity dimension mismatch");
  return std::clamp(a.values().dot(b.values()), -1.0, 1.0);
}

std::vector<double> tempered_softmax(std::span<const double> logits, Temperature gamma) {
  require(!logits.empty(), ErrorCode::EmptyInput, "tempered_softmax of empty logits");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - peak) / gamma.value());
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

DomainDataset::DomainDataset(std::string name, std::vector<RawEmbedding> raw,
                             std::optional<std::vector<std::size_t>> labels)
    : name_(std::move(name)), raw_(std::move(raw)), labels_(std::move(labels)) {
  require(!raw_.empty(), ErrorCode::EmptyInput, "domain dataset has no samples");
  dim_ = raw_.front().dim();
  unit_.reserve(raw_.size());
  for (const auto& r : raw_) {
    require(r.dim() == dim_, ErrorCode::DimensionMismatch, "domain samples differ in dimension");
    unit_.push_back(l2_normalize(r));
  }
}

DomainDataset DomainDataset::labeled(std::string name, std::vector<RawEmbedding> raw,
                                     std::vector<std::size_t> labels, std::size_t num_classes) {
  require(labels.size() == raw.size(), ErrorCode::DimensionMismatch,
          "label count differs from sample count");
  for (auto y : labels)
    require(y < num_classes, ErrorCode::InvalidArgument, "label out of range");
  return DomainDataset(std::move(name), std::move(raw), std::move(labels));
}

DomainDataset DomainDataset::unlabeled(std::string name, std::vector<RawEmbedding> raw) {
  return DomainDataset(std::move(name), std::move(raw), std::nullopt);
}

const std::vector<std::size_t>& DomainDataset::labels() const {
  require(labels_.has_value(), ErrorCode::InvalidArgument, "domain is unlabeled");
  return *labels_;
}

Matrix DomainDataset::unit_rows(std::span<const std::size_t> indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), dim_);
  for (std::size_t r = 0; r < indices.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = unit_.at(indices[r]).values().transpose();
  return out;
}

Matrix DomainDataset::unit_rows() const {
  Matrix out(static_cast<Eigen::Index>(unit_.size()), dim_);
  for (std::size_t r = 0; r < unit_.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = unit_[r].values().transpose();
  return out;
}

CentroidTable::CentroidTable(std::size_t num_domains, std::size_t num_classes)
    : domains_(num_domains),
      classes_(num_classes),
      raw_(num_domains * num_classes),
      unit_(num_domains * num_classes) {}

std::size_t CentroidTable::index(std::size_t domain, std::size_t k) const {
  require(domain < domains_ && k < classes_, ErrorCode::InvalidArgument,
          "centroid index out of range");
  return domain * classes_ + k;
}

bool CentroidTable::has(std::size_t domain, std::size_t k) const {
  return raw_[index(domain, k)].has_value();
}

const Vector& CentroidTable::raw_mean(std::size_t domain, std::size_t k) const {
  const auto& cell = raw_[index(domain, k)];
  require(cell.has_value(), ErrorCode::MissingCentroid, "no samples for this domain/class");
  return *cell;
}

const Vector& CentroidTable::unit_mean(std::size_t domain, std::size_t k) const {
  const auto& cell = unit_[index(domain, k)];
  require(cell.has_value(), ErrorCode::MissingCentroid, "no samples for this domain/class");
  return *cell;
}

void CentroidTable::set(std::size_t domain, std::size_t k, Vector raw_mean, Vector unit_mean) {
  const auto i = index(domain, k);
  raw_[i] = std::move(raw_mean);
  unit_[i] = std::move(unit_mean);
}

CentroidTable compute_centroids(std::span<const DomainDataset> sources, std::size_t num_classes) {
  CentroidTable table(sources.size(), num_classes);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& domain = sources[i];
    const auto& labels = domain.labels();
    std::vector<Vector> raw_sum(num_classes, Vector::Zero(domain.dim()));
    std::vector<Vector> unit_sum(num_classes, Vector::Zero(domain.dim()));
    std::vector<std::size_t> count(num_classes, 0);
    for (std::size_t j = 0; j < domain.size(); ++j) {
      raw_sum[labels[j]] += domain.raw()[j].values();
      unit_sum[labels[j]] += domain.unit()[j].values();
      ++count[labels[j]];
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
      if (count[k] == 0) continue;
      const double n = static_cast<double>(count[k]);
      table.set(i, k, raw_sum[k] / n, unit_sum[k] / n);
    }
  }
  return table;
}

Matrix to_matrix(const TextTable& table) {
  require(!table.empty(), ErrorCode::EmptyInput, "empty text table");
  Matrix out(static_cast<Eigen::Index>(table.size()), table.front().dim());
  for (std::size_t k = 0; k < table.size(); ++k) {
    require(table[k].dim() == out.cols(), ErrorCode::DimensionMismatch, "ragged text table");
    out.row(static_cast<Eigen::Index>(k)) = table[k].values().transpose();
  }
  return out;
}

}  // namespace crpl
