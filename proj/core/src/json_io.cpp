// SPDX-License-Identifier: Apache-2.0
#include "crpl/json_io.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "crpl/error.hpp"

namespace crpl {

using nlohmann::json;

namespace {

json parse_object(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::InvalidArgument, "expected a JSON object");
  return doc;
}

template <typename T>
T value_of(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(ErrorCode::InvalidArgument, "'" + key + "' must be a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        fail(ErrorCode::InvalidArgument, "'" + key + "' must be a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer())
        fail(ErrorCode::InvalidArgument, "'" + key + "' must be an integer");
    }
    return v.get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::InvalidArgument, "'" + key + "' has the wrong type");
  }
}

template <typename Target>
using Setter = std::function<void(Target&, const json&, const std::string&)>;

template <typename Target, typename T>
Setter<Target> set(T Target::*member) {
  return [member](Target& t, const json& v, const std::string& key) {
    t.*member = value_of<T>(v, key);
  };
}

template <typename Target>
Target apply(std::string_view text, Target out, const std::map<std::string, Setter<Target>>& table) {
  const json doc = parse_object(text);
  for (const auto& [key, value] : doc.items()) {
    const auto it = table.find(key);
    if (it == table.end()) fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    it->second(out, value, key);
  }
  out.validate();
  return out;
}

json eval_json(const EvalReport& r) {
  return {{"accuracy_tau_T", r.accuracy_tau_T},
          {"accuracy_tau_S", r.accuracy_tau_S},
          {"accuracy_tau_avg", r.accuracy_tau_avg},
          {"accuracy_zero_shot_base", r.accuracy_zero_shot_base}};
}

}  // namespace

TrainConfig train_config_from_json(std::string_view text, const TrainConfig& defaults) {
  using C = TrainConfig;
  const std::map<std::string, Setter<C>> table = {
      {"lambda_T", set(&C::lambda_T)},
      {"lambda_W", set(&C::lambda_W)},
      {"gamma", set(&C::gamma)},
      {"lr", set(&C::lr)},
      {"momentum", set(&C::momentum)},
      {"batch_size", set(&C::batch_size)},
      {"epochs", set(&C::epochs)},
      {"seed", set(&C::seed)},
      {"sinkhorn_epsilon", set(&C::sinkhorn_epsilon)},
      {"sinkhorn_max_iter", set(&C::sinkhorn_max_iter)},
      {"sinkhorn_tol", set(&C::sinkhorn_tol)},
      {"exact_ot_bound", set(&C::exact_ot_bound)},
      {"alpha", set(&C::alpha)},
      {"shared_length", set(&C::shared_length)},
      {"domain_length", set(&C::domain_length)},
      {"init_std", set(&C::init_std)},
      {"source_combined", set(&C::source_combined)},
      {"weight_metric",
       [](C& c, const json& v, const std::string& k) {
         c.weight_metric = parse_weight_metric(value_of<std::string>(v, k));
       }},
      {"weight_sign",
       [](C& c, const json& v, const std::string& k) {
         c.weight_sign = parse_weight_sign(value_of<std::string>(v, k));
       }},
      {"ablation_mode",
       [](C& c, const json& v, const std::string& k) {
         c.ablation_mode = parse_ablation_mode(value_of<std::string>(v, k));
       }},
  };
  return apply(text, defaults, table);
}

std::string to_json(const TrainConfig& c) {
  const json doc = {
      {"lambda_T", c.lambda_T},
      {"lambda_W", c.lambda_W},
      {"gamma", c.gamma},
      {"lr", c.lr},
      {"momentum", c.momentum},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"sinkhorn_epsilon", c.sinkhorn_epsilon},
      {"sinkhorn_max_iter", c.sinkhorn_max_iter},
      {"sinkhorn_tol", c.sinkhorn_tol},
      {"weight_metric", std::string(to_string(c.weight_metric))},
      {"weight_sign", std::string(to_string(c.weight_sign))},
      {"exact_ot_bound", c.exact_ot_bound},
      {"ablation_mode", std::string(to_string(c.ablation_mode))},
      {"alpha", c.alpha},
      {"shared_length", c.shared_length},
      {"domain_length", c.domain_length},
      {"init_std", c.init_std},
      {"source_combined", c.source_combined},
  };
  return doc.dump();
}

SyntheticSpec synthetic_spec_from_json(std::string_view text, const SyntheticSpec& defaults) {
  using S = SyntheticSpec;
  const std::map<std::string, Setter<S>> table = {
      {"K", set(&S::num_classes)},
      {"d", set(&S::dim)},
      {"n_sources", set(&S::n_sources)},
      {"samples_per_domain", set(&S::samples_per_domain)},
      {"domain_rotation_deg", set(&S::domain_rotation_deg)},
      {"noise_sigma", set(&S::noise_sigma)},
      {"seed", set(&S::seed)},
      {"radius", set(&S::radius)},
      {"base_length", set(&S::base_length)},
      {"d_tok", set(&S::token_dim)},
      {"d_hid", set(&S::hidden_dim)},
      {"fit_threshold", set(&S::fit_threshold)},
  };
  return apply(text, defaults, table);
}

std::string to_json(const SyntheticSpec& s) {
  const json doc = {
      {"K", s.num_classes},
      {"d", s.dim},
      {"n_sources", s.n_sources},
      {"samples_per_domain", s.samples_per_domain},
      {"domain_rotation_deg", s.domain_rotation_deg},
      {"noise_sigma", s.noise_sigma},
      {"seed", s.seed},
      {"radius", s.radius},
      {"base_length", s.base_length},
      {"d_tok", s.token_dim},
      {"d_hid", s.hidden_dim},
      {"fit_threshold", s.fit_threshold},
  };
  return doc.dump();
}

std::string to_json(const EvalReport& report) { return eval_json(report).dump(); }

std::string to_json_line(const EpochReport& r) {
  json doc = {{"epoch", r.epoch}, {"L_S", r.L_S}, {"L_T", r.L_T},
              {"L_W", r.L_W},     {"total", r.total}, {"lr", r.lr}};
  if (r.eval) doc["eval"] = eval_json(*r.eval);
  return doc.dump();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace crpl
