// SPDX-License-Identifier: Apache-2.0
//
// Dataset directory:
//   manifest.json     {schema_version, d, num_classes,
//                      domains: [{name, count, labeled, held_out}],
//                      text_init: {encoder_seed, d_tok, d_hid, base_length}}
//   <name>.f32        count x d raw embeddings, float32 row-major
//   <name>.labels.u32 source labels (labeled domains only)
//   <name>.heldout.u32 evaluation-only target labels (optional)
//   classes.f32       K x d_tok frozen class tokens
//   base.f32          base_length x d_tok frozen base context
// All payloads are little-endian.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "crpl/embedding.hpp"
#include "crpl/training.hpp"

namespace crpl {

inline constexpr int kDatasetSchemaVersion = 1;

/// Everything a dataset directory holds. The held-out target labels travel
/// beside the unlabeled target and are only handed to evaluation.
struct DatasetBundle {
  std::vector<DomainDataset> sources;
  DomainDataset target;
  std::vector<std::size_t> target_labels;  // empty when not shipped
  TextInit text;

  std::size_t num_classes() const { return static_cast<std::size_t>(text.class_tokens.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(target.dim()); }
  bool has_target_labels() const { return !target_labels.empty(); }

  TrainingData training_data() const;
  void validate() const;
};

void write_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle);

/// Throws IoFailure, SchemaMismatch or TruncatedBlob.
DatasetBundle read_dataset(const std::filesystem::path& dir);

/// FNV-1a over the float32 payloads, labels, names and text init. Equal
/// fingerprints mean the written directories would be byte-identical.
std::uint64_t dataset_fingerprint(const DatasetBundle& bundle);

}  // namespace crpl
