// SPDX-License-Identifier: Apache-2.0
#include "crpl/evaluate.hpp"

#include <string>

#include "crpl/error.hpp"
#include "crpl/pseudo_label.hpp"

namespace crpl {

std::string_view to_string(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::TauT: return "tau_T";
    case InferenceMode::TauS: return "tau_S";
    case InferenceMode::TauAvg: return "tau_avg";
    case InferenceMode::Base: return "base";
  }
  return "tau_T";
}

InferenceMode parse_inference_mode(std::string_view name) {
  if (name == "tau_T") return InferenceMode::TauT;
  if (name == "tau_S") return InferenceMode::TauS;
  if (name == "tau_avg") return InferenceMode::TauAvg;
  if (name == "base") return InferenceMode::Base;
  fail(ErrorCode::InvalidArgument, "unknown inference mode '" + std::string(name) + "'");
}

TextTable mean_table(std::span<const TextTable> tables) {
  require(!tables.empty(), ErrorCode::EmptyInput, "no tables to average");
  TextTable out;
  const auto classes = tables.front().size();
  for (std::size_t k = 0; k < classes; ++k) {
    Vector sum = Vector::Zero(tables.front()[k].dim());
    for (const auto& table : tables) {
      require(table.size() == classes, ErrorCode::DimensionMismatch, "tables differ in size");
      sum += table[k].values();
    }
    out.push_back(l2_normalize(sum));
  }
  return out;
}

TextTable inference_table(const PromptBank& bank, const TextEncoder& encoder, InferenceMode mode) {
  switch (mode) {
    case InferenceMode::TauT:
      return text_embedding_table(bank, encoder, Owner::target());
    case InferenceMode::Base:
      return text_embedding_table(bank, encoder, Owner::base());
    case InferenceMode::TauS:
    case InferenceMode::TauAvg: {
      std::vector<TextTable> tables;
      for (std::size_t i = 0; i < bank.num_sources(); ++i)
        tables.push_back(text_embedding_table(bank, encoder, Owner::source(i)));
      if (mode == InferenceMode::TauAvg)
        tables.push_back(text_embedding_table(bank, encoder, Owner::target()));
      if (tables.size() == 1) return tables.front();
      return mean_table(tables);
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown inference mode");
}

double table_accuracy(const DomainDataset& target, std::span<const std::size_t> labels,
                      const TextTable& table) {
  require(labels.size() == target.size(), ErrorCode::DimensionMismatch,
          "one held-out label per target sample is required");
  std::size_t correct = 0;
  const Temperature unit_gamma(1.0);
  for (std::size_t j = 0; j < target.size(); ++j)
    if (zero_shot_predict(target.unit()[j], table, unit_gamma) == labels[j]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(target.size());
}

double evaluate(const PromptBank& bank, const TextEncoder& encoder, const DomainDataset& target,
                std::span<const std::size_t> held_out_labels, InferenceMode mode) {
  return table_accuracy(target, held_out_labels, inference_table(bank, encoder, mode));
}

EvalReport evaluate_all(const PromptBank& bank, const TextEncoder& encoder,
                        const DomainDataset& target, std::span<const std::size_t> held_out_labels) {
  EvalReport r;
  r.accuracy_tau_T = evaluate(bank, encoder, target, held_out_labels, InferenceMode::TauT);
  r.accuracy_tau_S = evaluate(bank, encoder, target, held_out_labels, InferenceMode::TauS);
  r.accuracy_tau_avg = evaluate(bank, encoder, target, held_out_labels, InferenceMode::TauAvg);
  r.accuracy_zero_shot_base = evaluate(bank, encoder, target, held_out_labels, InferenceMode::Base);
  return r;
}

}  // namespace crpl
