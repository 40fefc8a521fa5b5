// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directory:
//   manifest.json  {schema_version, d, d_tok, d_hid, K, N_sources, M1, M2,
//                   encoder_seed[, optimizer: {step, total_steps, epoch}]}
//   shared.f32     K*M1 rows of d_tok (class-major)
//   source_<i>.f32 M2 rows per source domain
//   target.f32     M2 rows
//   classes.f32    K rows
//   base.f32       base-context rows
//   momentum_*.f32 optional optimizer buffers with the same layouts
// All blobs are little-endian float32, row-major.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "crpl/prompt.hpp"
#include "crpl/training.hpp"

namespace crpl {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  PromptBank bank;
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 0;
  std::uint64_t encoder_seed = 0;
  std::optional<OptimizerState> optimizer;

  TextEncoder make_encoder() const;
};

/// Fields a caller requires of a checkpoint; unset fields are not checked.
struct CheckpointExpectation {
  std::optional<std::size_t> embed_dim;
  std::optional<std::size_t> token_dim;
  std::optional<std::size_t> num_classes;
  std::optional<std::size_t> num_sources;
};

void save_checkpoint(const std::filesystem::path& dir, const PromptBank& bank,
                     const TextEncoder& encoder, const OptimizerState* optimizer = nullptr);

/// Throws IoFailure, SchemaMismatch or TruncatedBlob.
Checkpoint load_checkpoint(const std::filesystem::path& dir,
                           const CheckpointExpectation& expected = {});

}  // namespace crpl
