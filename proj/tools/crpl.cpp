// SPDX-License-Identifier: Apache-2.0
//
// crpl: command-line front end. Every numeric result is printed as JSON;
// training streams one JSON line per epoch.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crpl/ablation.hpp"
#include "crpl/checkpoint.hpp"
#include "crpl/dataset_io.hpp"
#include "crpl/error.hpp"
#include "crpl/evaluate.hpp"
#include "crpl/json_io.hpp"
#include "crpl/lemma.hpp"
#include "crpl/pseudo_label.hpp"
#include "crpl/synthetic.hpp"
#include "crpl/training.hpp"

namespace {

using nlohmann::json;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

crpl::TrainConfig load_train_config(const Globals& g) {
  crpl::TrainConfig config;
  if (!g.config.empty())
    config = crpl::train_config_from_json(crpl::read_text_file(g.config), config);
  if (g.seed) config.seed = *g.seed;
  config.validate();
  return config;
}

crpl::SyntheticSpec load_spec(const std::string& path, const Globals& g) {
  crpl::SyntheticSpec spec;
  if (!path.empty()) spec = crpl::synthetic_spec_from_json(crpl::read_text_file(path), spec);
  if (g.seed) spec.seed = *g.seed;
  spec.validate();
  return spec;
}

void require_out(const Globals& g, const char* what) {
  if (g.out.empty()) crpl::fail(crpl::ErrorCode::InvalidArgument, std::string("--out is required for ") + what);
}

crpl::TextEncoder encoder_for(const crpl::DatasetBundle& data) {
  return crpl::TextEncoder(data.text.token_dim, data.text.hidden_dim, data.dim(),
                           data.text.encoder_seed);
}

crpl::Checkpoint load_for(const std::filesystem::path& dir, const crpl::DatasetBundle& data) {
  crpl::CheckpointExpectation expect;
  expect.embed_dim = data.dim();
  expect.token_dim = data.text.token_dim;
  expect.num_classes = data.num_classes();
  return crpl::load_checkpoint(dir, expect);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int cmd_gen_data(const Globals& g, const std::string& spec_path) {
  require_out(g, "gen-data");
  const auto spec = load_spec(spec_path, g);
  const auto bench = crpl::generate_synthetic(spec);
  crpl::write_dataset(g.out, bench.data);
  const auto encoder = encoder_for(bench.data);
  const auto base = crpl::base_text_table(encoder, bench.data.text.class_tokens,
                                          bench.data.text.base_context);
  const json out = {
      {"out", g.out},
      {"fingerprint", hex64(crpl::dataset_fingerprint(bench.data))},
      {"fit_accuracy", bench.fit_accuracy},
      {"base_accuracy",
       crpl::table_accuracy(bench.data.target, bench.data.target_labels, base)},
      {"spec", json::parse(crpl::to_json(spec))},
  };
  std::cout << out.dump() << '\n';
  return 0;
}

int cmd_train(const Globals& g, const std::string& data_dir, const std::string& resume,
              std::size_t stop_after, bool with_eval) {
  require_out(g, "train");
  const auto config = load_train_config(g);
  const auto data = crpl::read_dataset(data_dir);
  std::optional<crpl::Trainer> trainer;
  if (!resume.empty()) {
    auto ckpt = load_for(resume, data);
    auto optimizer = ckpt.optimizer.value_or(crpl::OptimizerState{});
    trainer.emplace(data.training_data(), config, std::move(ckpt.bank), std::move(optimizer));
  } else {
    trainer.emplace(data.training_data(), config);
  }
  if (with_eval && data.has_target_labels()) {
    trainer->set_evaluator([&data](const crpl::PromptBank& bank, const crpl::TextEncoder& enc) {
      return crpl::evaluate_all(bank, enc, data.target, data.target_labels);
    });
  }
  const std::size_t last = stop_after == 0 ? config.epochs : std::min(stop_after, config.epochs);
  while (trainer->optimizer().epoch < last) {
    const auto report = trainer->run_epoch();
    std::cout << crpl::to_json_line(report) << '\n' << std::flush;
  }
  crpl::save_checkpoint(g.out, trainer->bank(), trainer->encoder(), &trainer->optimizer());
  return 0;
}

int cmd_eval(const Globals& g, const std::string& data_dir, const std::string& ckpt_dir,
             const std::string& mode) {
  const auto data = crpl::read_dataset(data_dir);
  if (!data.has_target_labels())
    crpl::fail(crpl::ErrorCode::InvalidArgument, "dataset has no held-out target labels");
  const auto ckpt = load_for(ckpt_dir, data);
  const auto encoder = ckpt.make_encoder();
  json out;
  if (mode.empty()) {
    out = json::parse(crpl::to_json(crpl::evaluate_all(ckpt.bank, encoder, data.target,
                                                       data.target_labels)));
  } else {
    const auto m = crpl::parse_inference_mode(mode);
    out = {{"mode", mode},
           {"accuracy", crpl::evaluate(ckpt.bank, encoder, data.target, data.target_labels, m)}};
  }
  std::cout << out.dump() << '\n';
  (void)g;
  return 0;
}

int cmd_pseudo_labels(const Globals& g, const std::string& data_dir, const std::string& ckpt_dir) {
  const auto config = load_train_config(g);
  const auto data = crpl::read_dataset(data_dir);
  std::optional<crpl::Trainer> trainer;
  if (ckpt_dir.empty()) {
    trainer.emplace(data.training_data(), config);
  } else {
    auto ckpt = load_for(ckpt_dir, data);
    trainer.emplace(data.training_data(), config, std::move(ckpt.bank), crpl::OptimizerState{});
  }
  constexpr std::size_t kChunk = 256;
  const std::size_t n = data.target.size();
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t j = begin; j < std::min(n, begin + kChunk); ++j) idx.push_back(j);
    const auto labels = trainer->pseudo_labels(idx);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::vector<double> probs(labels.cols());
      std::size_t argmax = 0;
      for (Eigen::Index k = 0; k < labels.cols(); ++k) {
        probs[static_cast<std::size_t>(k)] = labels(static_cast<Eigen::Index>(r), k);
        if (probs[static_cast<std::size_t>(k)] > probs[argmax]) argmax = static_cast<std::size_t>(k);
      }
      const bool empty = labels.row(static_cast<Eigen::Index>(r)).sum() == 0.0;
      json line = {{"sample_index", idx[r]}, {"probs", probs}};
      line["argmax"] = empty ? json(nullptr) : json(argmax);
      std::cout << line.dump() << '\n';
    }
  }
  return 0;
}

int cmd_verify_lemma(const Globals& g, std::size_t instances) {
  const auto report = crpl::verify_lemma(instances, g.seed.value_or(0));
  const json out = {{"instances", report.cases.size()},
                    {"max_abs_gap", report.max_abs_gap},
                    {"pass", report.pass}};
  std::cout << out.dump() << '\n';
  return report.pass ? 0 : 1;
}

int cmd_ablate(const Globals& g, const std::string& data_dir, const std::string& spec_path,
               const std::vector<std::string>& mode_names) {
  const auto config = load_train_config(g);
  std::vector<crpl::AblationMode> modes;
  for (const auto& name : mode_names) modes.push_back(crpl::parse_ablation_mode(name));
  if (modes.empty()) modes = crpl::all_ablation_modes();
  const auto table = data_dir.empty()
                         ? crpl::run_ablation(load_spec(spec_path, g), config, modes)
                         : crpl::run_ablation(crpl::read_dataset(data_dir), config, modes);
  const std::string text = crpl::to_json(table);
  std::cout << text << '\n';
  if (!g.out.empty()) {
    std::filesystem::create_directories(g.out);
    std::ofstream(std::filesystem::path(g.out) / "ablation.json") << text << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustering-reinforced prompt learning in embedding space"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Override the seed of the config or spec");
  app.add_option("--config", g.config, "Training config JSON file");
  app.add_option("--out", g.out, "Output directory");

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic benchmark");
  std::string spec_path;
  gen->add_option("--spec", spec_path, "Synthetic spec JSON file");

  auto* train = app.add_subcommand("train", "Train prompts and write a checkpoint");
  std::string data_dir;
  std::string resume;
  std::size_t stop_after = 0;
  bool with_eval = false;
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--resume", resume, "Checkpoint directory to resume from");
  train->add_option("--stop-after", stop_after, "Stop once this many epochs are complete");
  train->add_flag("--eval", with_eval, "Attach held-out accuracy to every epoch line");

  auto* eval = app.add_subcommand("eval", "Held-out target accuracy of a checkpoint");
  std::string ckpt_dir;
  std::string mode;
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--checkpoint", ckpt_dir, "Checkpoint directory")->required();
  eval->add_option("--mode", mode, "tau_T, tau_S, tau_avg or base (default: all)");

  auto* labels = app.add_subcommand("pseudo-labels", "Target pseudo-labels as JSON lines");
  labels->add_option("--data", data_dir, "Dataset directory")->required();
  labels->add_option("--checkpoint", ckpt_dir, "Checkpoint directory (default: initial prompts)");

  auto* lemma = app.add_subcommand("verify-lemma", "Exact OT versus constrained assignment");
  std::size_t instances = 200;
  lemma->add_option("--instances", instances, "Number of random instances");

  auto* ablate = app.add_subcommand("ablate", "Train every ablation mode on the same data");
  std::vector<std::string> modes;
  ablate->add_option("--data", data_dir, "Dataset directory (default: generate from --spec)");
  ablate->add_option("--spec", spec_path, "Synthetic spec JSON file");
  ablate->add_option("--modes", modes, "Subset of CRPL, SPL_only, CPL_only, CPL_with_W");

  for (auto* sub : {gen, train, eval, labels, lemma, ablate}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen_data(g, spec_path);
    if (train->parsed()) return cmd_train(g, data_dir, resume, stop_after, with_eval);
    if (eval->parsed()) return cmd_eval(g, data_dir, ckpt_dir, mode);
    if (labels->parsed()) return cmd_pseudo_labels(g, data_dir, ckpt_dir);
    if (lemma->parsed()) return cmd_verify_lemma(g, instances);
    if (ablate->parsed()) return cmd_ablate(g, data_dir, spec_path, modes);
  } catch (const crpl::Error& e) {
    std::cerr << "error [" << crpl::to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
