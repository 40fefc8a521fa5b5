// SPDX-License-Identifier: Apache-2.0
#include "crpl/checkpoint.hpp"

#include <string>

#include "blob_io.hpp"
#include "crpl/error.hpp"

namespace crpl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Matrix stack(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  Matrix out(rows, blocks.front().cols());
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

std::vector<Matrix> unstack(const Matrix& m, std::size_t blocks, Eigen::Index block_rows) {
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < blocks; ++k)
    out.push_back(m.middleRows(static_cast<Eigen::Index>(k) * block_rows, block_rows));
  return out;
}

void write_prompts(const fs::path& dir, const std::string& prefix, const LearnablePrompts& p) {
  detail::write_f32(dir / (prefix + "shared.f32"), stack(p.shared));
  for (std::size_t i = 0; i < p.sources.size(); ++i)
    detail::write_f32(dir / (prefix + "source_" + std::to_string(i) + ".f32"), p.sources[i]);
  detail::write_f32(dir / (prefix + "target.f32"), p.target);
}

LearnablePrompts read_prompts(const fs::path& dir, const std::string& prefix,
                              const PromptShape& shape) {
  const auto dtok = static_cast<Eigen::Index>(shape.token_dim);
  const auto m1 = static_cast<Eigen::Index>(shape.shared_length);
  const auto m2 = static_cast<Eigen::Index>(shape.domain_length);
  LearnablePrompts p;
  p.shared = unstack(
      detail::read_f32(dir / (prefix + "shared.f32"),
                       static_cast<Eigen::Index>(shape.num_classes) * m1, dtok),
      shape.num_classes, m1);
  for (std::size_t i = 0; i < shape.num_sources; ++i)
    p.sources.push_back(
        detail::read_f32(dir / (prefix + "source_" + std::to_string(i) + ".f32"), m2, dtok));
  p.target = detail::read_f32(dir / (prefix + "target.f32"), m2, dtok);
  return p;
}

void check(const std::optional<std::size_t>& expected, std::size_t actual, const char* what) {
  if (expected && *expected != actual)
    fail(ErrorCode::SchemaMismatch, std::string("checkpoint ") + what + " is " +
                                        std::to_string(actual) + ", expected " +
                                        std::to_string(*expected));
}

}  // namespace

TextEncoder Checkpoint::make_encoder() const {
  return TextEncoder(bank.token_dim(), hidden_dim, embed_dim, encoder_seed);
}

void save_checkpoint(const fs::path& dir, const PromptBank& bank, const TextEncoder& encoder,
                     const OptimizerState* optimizer) {
  require(encoder.token_dim() == bank.token_dim(), ErrorCode::DimensionMismatch,
          "encoder and prompt bank disagree on the token dimension");
  detail::ensure_directory(dir);
  const auto shape = bank.shape();
  json manifest = {
      {"schema_version", kCheckpointSchemaVersion},
      {"d", encoder.embed_dim()},
      {"d_tok", shape.token_dim},
      {"d_hid", encoder.hidden_dim()},
      {"K", shape.num_classes},
      {"N_sources", shape.num_sources},
      {"M1", shape.shared_length},
      {"M2", shape.domain_length},
      {"encoder_seed", encoder.seed()},
  };
  write_prompts(dir, "", bank.learnable());
  detail::write_f32(dir / "classes.f32", bank.class_tokens());
  detail::write_f32(dir / "base.f32", bank.base_context());
  if (optimizer != nullptr) {
    manifest["optimizer"] = {{"step", optimizer->step},
                             {"total_steps", optimizer->total_steps},
                             {"epoch", optimizer->epoch}};
    write_prompts(dir, "momentum_", optimizer->momentum);
  }
  detail::write_json(dir / "manifest.json", manifest);
}

Checkpoint load_checkpoint(const fs::path& dir, const CheckpointExpectation& expected) {
  const json manifest = detail::read_json(dir / "manifest.json");
  if (detail::field<int>(manifest, "schema_version") != kCheckpointSchemaVersion)
    fail(ErrorCode::SchemaMismatch, "unsupported checkpoint schema version");
  const auto d = detail::field<std::size_t>(manifest, "d");
  const PromptShape shape{detail::field<std::size_t>(manifest, "K"),
                          detail::field<std::size_t>(manifest, "N_sources"),
                          detail::field<std::size_t>(manifest, "M1"),
                          detail::field<std::size_t>(manifest, "M2"),
                          detail::field<std::size_t>(manifest, "d_tok")};
  check(expected.embed_dim, d, "embedding dimension d");
  check(expected.token_dim, shape.token_dim, "token dimension");
  check(expected.num_classes, shape.num_classes, "class count");
  check(expected.num_sources, shape.num_sources, "source count");
  if (shape.num_classes == 0 || shape.num_sources == 0 || shape.token_dim == 0 ||
      shape.shared_length == 0 || shape.domain_length == 0)
    fail(ErrorCode::SchemaMismatch, "checkpoint manifest has an empty dimension");

  const auto dtok = static_cast<Eigen::Index>(shape.token_dim);
  auto learnable = read_prompts(dir, "", shape);
  Matrix classes =
      detail::read_f32(dir / "classes.f32", static_cast<Eigen::Index>(shape.num_classes), dtok);
  Matrix base = detail::read_f32(dir / "base.f32", -1, dtok);

  Checkpoint out{PromptBank(std::move(learnable), std::move(classes), std::move(base)), d,
                 detail::field<std::size_t>(manifest, "d_hid"),
                 static_cast<std::uint64_t>(detail::field<std::size_t>(manifest, "encoder_seed")),
                 std::nullopt};
  if (manifest.contains("optimizer")) {
    const json& opt = manifest["optimizer"];
    OptimizerState state;
    state.step = detail::field<std::size_t>(opt, "step");
    state.total_steps = detail::field<std::size_t>(opt, "total_steps");
    state.epoch = detail::field<std::size_t>(opt, "epoch");
    state.momentum = read_prompts(dir, "momentum_", shape);
    out.optimizer = std::move(state);
  }
  return out;
}

}  // namespace crpl
