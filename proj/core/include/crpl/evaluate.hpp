// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "crpl/embedding.hpp"
#include "crpl/prompt.hpp"

namespace crpl {

/// Which text table scores the target at inference time.
enum class InferenceMode {
  TauT,    // target prompts only
  TauS,    // renormalized mean of the source tables
  TauAvg,  // renormalized mean of every domain table (sources and target)
  Base,    // frozen hand-crafted prompt
};

std::string_view to_string(InferenceMode mode);
InferenceMode parse_inference_mode(std::string_view name);

/// Accuracies in percent.
struct EvalReport {
  double accuracy_tau_T = 0.0;
  double accuracy_tau_S = 0.0;
  double accuracy_tau_avg = 0.0;
  double accuracy_zero_shot_base = 0.0;
};

/// Element-wise mean of several tables, each row renormalized.
TextTable mean_table(std::span<const TextTable> tables);

TextTable inference_table(const PromptBank& bank, const TextEncoder& encoder, InferenceMode mode);

/// Percentage of samples whose zero-shot argmax under `table` equals the label.
double table_accuracy(const DomainDataset& target, std::span<const std::size_t> labels,
                      const TextTable& table);

double evaluate(const PromptBank& bank, const TextEncoder& encoder, const DomainDataset& target,
                std::span<const std::size_t> held_out_labels, InferenceMode mode);

EvalReport evaluate_all(const PromptBank& bank, const TextEncoder& encoder,
                        const DomainDataset& target, std::span<const std::size_t> held_out_labels);

}  // namespace crpl
