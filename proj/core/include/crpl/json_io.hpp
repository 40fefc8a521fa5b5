// SPDX-License-Identifier: Apache-2.0
//
// JSON text for configs, metric streams and evaluation tables. Parsing
// starts from the given defaults and overrides only the keys present;
// unknown keys are rejected.
#pragma once

#include <string>
#include <string_view>

#include "crpl/evaluate.hpp"
#include "crpl/synthetic.hpp"
#include "crpl/training.hpp"

namespace crpl {

/// Throws InvalidArgument on malformed JSON, unknown keys or bad values.
TrainConfig train_config_from_json(std::string_view text, const TrainConfig& defaults = {});
std::string to_json(const TrainConfig& config);

SyntheticSpec synthetic_spec_from_json(std::string_view text, const SyntheticSpec& defaults = {});
std::string to_json(const SyntheticSpec& spec);

std::string to_json(const EvalReport& report);

/// One JSON Lines record: {epoch, L_S, L_T, L_W, total, lr[, eval]}.
std::string to_json_line(const EpochReport& report);

/// Reads a whole file into a string; throws IoFailure.
std::string read_text_file(const std::string& path);

}  // namespace crpl
