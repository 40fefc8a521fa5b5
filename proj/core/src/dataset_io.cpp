// SPDX-License-Identifier: Apache-2.0
#include "crpl/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "blob_io.hpp"
#include "crpl/error.hpp"

namespace crpl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kReserved[] = {"manifest", "classes", "base"};

void check_name(const std::string& name) {
  require(!name.empty(), ErrorCode::InvalidArgument, "domain name is empty");
  const bool ok = std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  });
  if (!ok) fail(ErrorCode::InvalidArgument, "domain name '" + name + "' is not file-safe");
  for (const char* r : kReserved)
    if (name == r) fail(ErrorCode::InvalidArgument, "domain name '" + name + "' is reserved");
}

Matrix raw_matrix(const DomainDataset& domain) {
  Matrix m(static_cast<Eigen::Index>(domain.size()), domain.dim());
  for (std::size_t j = 0; j < domain.size(); ++j)
    m.row(static_cast<Eigen::Index>(j)) = domain.raw()[j].values().transpose();
  return m;
}

std::vector<RawEmbedding> raw_rows(const Matrix& m) {
  std::vector<RawEmbedding> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).transpose());
  return out;
}

json domain_entry(const DomainDataset& domain, bool held_out) {
  return {{"name", domain.name()},
          {"count", domain.size()},
          {"labeled", domain.is_labeled()},
          {"held_out", held_out}};
}

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 1099511628211ull;
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      const auto b = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
      bytes(&b, 1);
    }
  }
  void text(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        u64(std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
  }
  void labels(const std::vector<std::size_t>& v) {
    u64(v.size());
    for (auto x : v) u64(x);
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 14695981039346656037ull;
};

}  // namespace

TrainingData DatasetBundle::training_data() const { return TrainingData{sources, target, text}; }

void DatasetBundle::validate() const {
  training_data().validate();
  require(target_labels.empty() || target_labels.size() == target.size(),
          ErrorCode::DimensionMismatch, "held-out label count differs from the target size");
  for (auto y : target_labels)
    require(y < num_classes(), ErrorCode::InvalidArgument, "held-out label out of range");
  check_name(target.name());
  for (const auto& s : sources) {
    check_name(s.name());
    require(s.name() != target.name(), ErrorCode::InvalidArgument, "duplicate domain name");
  }
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j)
      require(sources[i].name() != sources[j].name(), ErrorCode::InvalidArgument,
              "duplicate domain name");
}

void write_dataset(const fs::path& dir, const DatasetBundle& bundle) {
  bundle.validate();
  detail::ensure_directory(dir);
  json domains = json::array();
  for (const auto& s : bundle.sources) {
    detail::write_f32(dir / (s.name() + ".f32"), raw_matrix(s));
    detail::write_u32(dir / (s.name() + ".labels.u32"), s.labels());
    domains.push_back(domain_entry(s, false));
  }
  const auto& t = bundle.target;
  detail::write_f32(dir / (t.name() + ".f32"), raw_matrix(t));
  if (bundle.has_target_labels())
    detail::write_u32(dir / (t.name() + ".heldout.u32"), bundle.target_labels);
  domains.push_back(domain_entry(t, bundle.has_target_labels()));

  detail::write_f32(dir / "classes.f32", bundle.text.class_tokens);
  detail::write_f32(dir / "base.f32", bundle.text.base_context);
  const json manifest = {
      {"schema_version", kDatasetSchemaVersion},
      {"d", bundle.dim()},
      {"num_classes", bundle.num_classes()},
      {"domains", domains},
      {"text_init",
       {{"encoder_seed", bundle.text.encoder_seed},
        {"d_tok", bundle.text.token_dim},
        {"d_hid", bundle.text.hidden_dim},
        {"base_length", static_cast<std::size_t>(bundle.text.base_context.rows())}}},
  };
  detail::write_json(dir / "manifest.json", manifest);
}

DatasetBundle read_dataset(const fs::path& dir) {
  const json manifest = detail::read_json(dir / "manifest.json");
  if (detail::field<int>(manifest, "schema_version") != kDatasetSchemaVersion)
    fail(ErrorCode::SchemaMismatch, "unsupported dataset schema version");
  const auto d = static_cast<Eigen::Index>(detail::field<std::size_t>(manifest, "d"));
  const auto K = detail::field<std::size_t>(manifest, "num_classes");
  const json domains = detail::field<json>(manifest, "domains");
  if (!domains.is_array()) fail(ErrorCode::SchemaMismatch, "'domains' must be an array");
  const json text = detail::field<json>(manifest, "text_init");

  std::vector<DomainDataset> sources;
  std::optional<DomainDataset> target;
  std::vector<std::size_t> target_labels;
  for (const json& entry : domains) {
    const auto name = detail::field<std::string>(entry, "name");
    check_name(name);
    const auto count = detail::field<std::size_t>(entry, "count");
    const bool labeled = detail::field<bool>(entry, "labeled");
    const bool held_out = entry.contains("held_out") && detail::field<bool>(entry, "held_out");
    auto raw = raw_rows(detail::read_f32(dir / (name + ".f32"), static_cast<Eigen::Index>(count), d));
    const fs::path labels_path = dir / (name + ".labels.u32");
    if (labeled) {
      if (held_out) fail(ErrorCode::SchemaMismatch, "a labeled domain cannot be held out");
      auto labels = detail::read_u32(labels_path, count);
      for (auto y : labels)
        if (y >= K) fail(ErrorCode::SchemaMismatch, "label out of range in " + name);
      sources.push_back(DomainDataset::labeled(name, std::move(raw), std::move(labels), K));
    } else {
      if (fs::exists(labels_path))
        fail(ErrorCode::SchemaMismatch,
             "domain '" + name + "' is declared unlabeled but has a labels file");
      if (target) fail(ErrorCode::SchemaMismatch, "more than one unlabeled domain");
      target = DomainDataset::unlabeled(name, std::move(raw));
      if (held_out) target_labels = detail::read_u32(dir / (name + ".heldout.u32"), count);
    }
  }
  if (!target) fail(ErrorCode::SchemaMismatch, "no unlabeled target domain");
  if (sources.empty()) fail(ErrorCode::SchemaMismatch, "no labeled source domain");

  TextInit init;
  init.encoder_seed =
      static_cast<std::uint64_t>(detail::field<std::size_t>(text, "encoder_seed"));
  init.token_dim = detail::field<std::size_t>(text, "d_tok");
  init.hidden_dim = detail::field<std::size_t>(text, "d_hid");
  const auto base_length = detail::field<std::size_t>(text, "base_length");
  const auto dtok = static_cast<Eigen::Index>(init.token_dim);
  init.class_tokens = detail::read_f32(dir / "classes.f32", static_cast<Eigen::Index>(K), dtok);
  init.base_context =
      detail::read_f32(dir / "base.f32", static_cast<Eigen::Index>(base_length), dtok);

  DatasetBundle bundle{std::move(sources), std::move(*target), std::move(target_labels),
                       std::move(init)};
  try {
    bundle.validate();
  } catch (const Error& e) {
    fail(ErrorCode::SchemaMismatch, std::string("inconsistent dataset: ") + e.what());
  }
  return bundle;
}

std::uint64_t dataset_fingerprint(const DatasetBundle& bundle) {
  Fnv1a h;
  for (const auto& s : bundle.sources) {
    h.text(s.name());
    h.matrix(raw_matrix(s));
    h.labels(s.labels());
  }
  h.text(bundle.target.name());
  h.matrix(raw_matrix(bundle.target));
  h.labels(bundle.target_labels);
  h.u64(bundle.text.encoder_seed);
  h.u64(bundle.text.token_dim);
  h.u64(bundle.text.hidden_dim);
  h.matrix(bundle.text.class_tokens);
  h.matrix(bundle.text.base_context);
  return h.value();
}

}  // namespace crpl
