// SPDX-License-Identifier: Apache-2.0
#include "crpl/ablation.hpp"

#include <chrono>
#include <cstdio>
#include <optional>

#include <json.hpp>

#include "crpl/error.hpp"

namespace crpl {

namespace {

AblationRow train_mode(const DatasetBundle& data, TrainConfig config, AblationMode mode) {
  config.ablation_mode = mode;
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(data.training_data(), config);
  const TextEncoder encoder(data.text.token_dim, data.text.hidden_dim, data.dim(),
                            data.text.encoder_seed);
  AblationRow row;
  row.mode = mode;
  row.eval = evaluate_all(result.bank, encoder, data.target, data.target_labels);
  row.final_total_loss = result.report.epochs.empty() ? 0.0 : result.report.epochs.back().total;
  row.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

void check_modes(std::span<const AblationMode> modes) {
  require(!modes.empty(), ErrorCode::EmptyInput, "no ablation modes requested");
}

}  // namespace

const AblationRow& AblationTable::row(AblationMode mode) const {
  for (const auto& r : rows)
    if (r.mode == mode) return r;
  fail(ErrorCode::InvalidArgument,
       "ablation mode " + std::string(to_string(mode)) + " was not run");
}

std::vector<AblationMode> all_ablation_modes() {
  return {AblationMode::CPLOnly, AblationMode::CPLWithW, AblationMode::SPLOnly,
          AblationMode::CRPL};
}

AblationTable run_ablation(const SyntheticSpec& spec, const TrainConfig& config,
                           std::span<const AblationMode> modes) {
  check_modes(modes);
  AblationTable table;
  std::optional<std::uint64_t> fingerprint;
  for (const auto mode : modes) {
    const SyntheticBenchmark bench = generate_synthetic(spec);
    const std::uint64_t fp = dataset_fingerprint(bench.data);
    if (fingerprint && *fingerprint != fp)
      fail(ErrorCode::InvalidArgument, "regenerated benchmark differs between ablation modes");
    fingerprint = fp;
    table.fit_accuracy = bench.fit_accuracy;
    table.rows.push_back(train_mode(bench.data, config, mode));
  }
  table.data_fingerprint = *fingerprint;
  return table;
}

AblationTable run_ablation(const DatasetBundle& data, const TrainConfig& config,
                           std::span<const AblationMode> modes) {
  check_modes(modes);
  require(data.has_target_labels(), ErrorCode::InvalidArgument,
          "ablation needs held-out target labels");
  AblationTable table;
  table.data_fingerprint = dataset_fingerprint(data);
  for (const auto mode : modes) table.rows.push_back(train_mode(data, config, mode));
  return table;
}

std::string to_json(const AblationTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"mode", std::string(to_string(r.mode))},
                    {"accuracy_tau_T", r.eval.accuracy_tau_T},
                    {"accuracy_tau_S", r.eval.accuracy_tau_S},
                    {"accuracy_tau_avg", r.eval.accuracy_tau_avg},
                    {"accuracy_zero_shot_base", r.eval.accuracy_zero_shot_base},
                    {"final_total_loss", r.final_total_loss},
                    {"seconds", r.seconds}});
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(table.data_fingerprint));
  nlohmann::json doc = {{"data_fingerprint", hex}, {"rows", rows}};
  if (table.fit_accuracy) doc["fit_accuracy"] = *table.fit_accuracy;
  return doc.dump();
}

}  // namespace crpl
