// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crpl/evaluate.hpp"
#include "crpl/synthetic.hpp"
#include "crpl/training.hpp"

namespace crpl {

struct AblationRow {
  AblationMode mode = AblationMode::CRPL;
  EvalReport eval;
  double final_total_loss = 0.0;
  double seconds = 0.0;
};

struct AblationTable {
  std::uint64_t data_fingerprint = 0;
  std::optional<double> fit_accuracy;  // set when the benchmark was generated
  std::vector<AblationRow> rows;

  /// Throws InvalidArgument when the mode did not run.
  const AblationRow& row(AblationMode mode) const;
};

/// Every ablation mode in table order: CPL_only, CPL_with_W, SPL_only, CRPL.
std::vector<AblationMode> all_ablation_modes();

/// Train one model per mode on identical data and seed. The benchmark is
/// regenerated for each mode and its fingerprint must not change.
AblationTable run_ablation(const SyntheticSpec& spec, const TrainConfig& config,
                           std::span<const AblationMode> modes);

/// Same, on an existing dataset with held-out target labels.
AblationTable run_ablation(const DatasetBundle& data, const TrainConfig& config,
                           std::span<const AblationMode> modes);

std::string to_json(const AblationTable& table);

}  // namespace crpl
