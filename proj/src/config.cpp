// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/config.hpp"

#include <fstream>
#include <sstream>

namespace dpg {

Json default_config() {
  return Json::parse(R"({
  "seed": 0,
  "mode": "dpg",
  "diffusion": {"steps": 100, "beta_start": 0.001, "beta_end": 0.2, "schedule": "linear"},
  "data": {"domain": "mixture2d", "seed": 0, "num_concepts": 10, "first_concept": 0,
           "num_contexts": 5, "glyph_size": 8},
  "codec": {"mode": "identity", "seed": 0},
  "policy": {"hidden": [128, 128, 128], "temb_dim": 16, "cond_dim": 16},
  "critic": {"hidden": [32], "lookahead_input": true},
  "encoder": {"hidden": 64, "dim": 32, "seed": 1234},
  "reward": {"kind": "look_forward", "components": [], "lambda": 1.0, "gamma": 0.0,
             "target_mode": "discounted", "mc_horizon": 8, "lf_weight_clip": 10.0,
             "feature_t_frac": 0.5},
  "trainer": {"steps": 10000, "batch_size": 16, "lr_policy": 0.001, "lr_critic": 0.001,
              "momentum": 0.9, "policy_objective": "composite", "param_mask": "all",
              "eval_every": 500, "critic_steps_per_policy_step": 1, "explore_std": 0.1,
              "freeze_embeddings": false, "critic_warmup": 500, "action_grad_clip": 10.0,
              "checkpoint_every": 0},
  "eval": {"seed": 0, "samples_per_cell": 8, "probe_seed": 7, "during_training": true}
})");
}

namespace {

std::string type_label(const Json& v) {
  if (v.is_number_float()) return "number";
  if (v.is_number_integer()) return "integer";
  if (v.is_boolean()) return "boolean";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

void check_type(const std::string& key, const Json& def, const Json& val) {
  bool ok = false;
  if (def.is_number_float()) ok = val.is_number();
  else if (def.is_number_integer()) ok = val.is_number_integer() && val.get<long long>() >= 0;
  else if (def.is_boolean()) ok = val.is_boolean();
  else if (def.is_string()) ok = val.is_string();
  else if (def.is_array()) ok = val.is_array();
  else if (def.is_object()) ok = val.is_object();
  if (!ok) {
    const std::string want = def.is_number_integer() ? "non-negative integer" : type_label(def);
    throw ConfigError(key, "expected " + want + ", got " + type_label(val) + " " + val.dump());
  }
}

void merge_into(Json& base, const Json& overlay, const std::string& prefix) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(key, "unknown key");
    Json& slot = base[it.key()];
    check_type(key, slot, it.value());
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else if (slot.is_number_float()) {
      slot = it.value().get<double>();
    } else {
      slot = it.value();
    }
  }
}

std::vector<std::string> split_key(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  return parts;
}

}  // namespace

Json resolve_config(const std::string& text) {
  Json overlay;
  try {
    overlay = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  if (!overlay.is_object()) throw ConfigError("<file>", "top level must be an object");
  Json config = default_config();
  merge_into(config, overlay, "");
  return config;
}

Json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return resolve_config(ss.str());
}

const Json& config_at(const Json& config, const std::string& dotted) {
  const Json* node = &config;
  for (const auto& part : split_key(dotted)) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError(dotted, "unknown key");
    node = &(*node)[part];
  }
  return *node;
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must have the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  const auto parts = split_key(key);
  Json* node = &config;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ConfigError(key, "unknown key");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back())) throw ConfigError(key, "unknown key");
  Json& slot = (*node)[parts.back()];
  // A string default accepts any raw text, e.g. --set data.domain=glyph.
  if (slot.is_string() && !value.is_string()) value = raw;
  check_type(key, slot, value);
  if (slot.is_object()) {
    merge_into(slot, value, key);
  } else if (slot.is_number_float()) {
    slot = value.get<double>();
  } else {
    slot = value;
  }
}

void apply_overrides(Json& config, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) apply_override(config, a);
}

namespace {

std::size_t get_count(const Json& c, const std::string& key, std::size_t min_value) {
  const auto v = config_at(c, key).get<long long>();
  if (v < static_cast<long long>(min_value)) {
    throw ConfigError(key, "must be >= " + std::to_string(min_value));
  }
  return static_cast<std::size_t>(v);
}

double get_number(const Json& c, const std::string& key) { return config_at(c, key).get<double>(); }

std::string get_string(const Json& c, const std::string& key) {
  return config_at(c, key).get<std::string>();
}

std::vector<std::size_t> get_widths(const Json& c, const std::string& key) {
  const Json& arr = config_at(c, key);
  std::vector<std::size_t> out;
  for (const auto& v : arr) {
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
      throw ConfigError(key, "entries must be positive integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  if (out.empty()) throw ConfigError(key, "needs at least one hidden layer");
  return out;
}

template <typename F>
auto parse_field(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

RunMode run_mode(const Json& config) {
  const auto mode = get_string(config, "mode");
  if (mode == "dpg") return RunMode::Dpg;
  if (mode == "baseline") return RunMode::Baseline;
  throw ConfigError("mode", "expected 'dpg' or 'baseline', got '" + mode + "'");
}

Experiment build_experiment(const Json& c) {
  run_mode(c);
  Experiment exp;

  const std::size_t steps = get_count(c, "diffusion.steps", 1);
  const double beta_start = get_number(c, "diffusion.beta_start");
  const double beta_end = get_number(c, "diffusion.beta_end");
  const auto kind = parse_field("diffusion.schedule", [&] { return parse_schedule_kind(get_string(c, "diffusion.schedule")); });
  if (!(beta_start > 0.0 && beta_start < 1.0)) throw ConfigError("diffusion.beta_start", "must lie in (0,1)");
  if (!(beta_end >= beta_start && beta_end < 1.0)) {
    throw ConfigError("diffusion.beta_end", "must lie in [beta_start, 1)");
  }
  exp.schedule = steps >= 2 ? make_schedule(steps, beta_start, beta_end, kind)
                            : schedule_from_betas({beta_start});

  exp.domain = parse_field("data.domain", [&] { return parse_domain(get_string(c, "data.domain")); });
  const auto data_seed = config_at(c, "data.seed").get<std::uint64_t>();
  const std::size_t num_concepts = get_count(c, "data.num_concepts", 1);
  const std::size_t first = get_count(c, "data.first_concept", 0);
  exp.num_contexts = get_count(c, "data.num_contexts", 1);
  if (exp.num_contexts > kNumContexts) {
    throw ConfigError("data.num_contexts", "at most " + std::to_string(kNumContexts) + " contexts exist");
  }
  const std::size_t glyph_size = get_count(c, "data.glyph_size", 1);
  if (glyph_size != 8 && glyph_size != 16) throw ConfigError("data.glyph_size", "must be 8 or 16");
  for (std::size_t k = 0; k < num_concepts; ++k) {
    exp.concepts.push_back(generate_concept(exp.domain, data_seed, first + k, glyph_size));
  }
  const std::size_t dim = exp.concepts.front().dim();

  const auto codec_mode = get_string(c, "codec.mode");
  if (codec_mode == "identity") {
    exp.codec = LatentCodec::identity();
  } else if (codec_mode == "linear") {
    exp.codec = LatentCodec::linear(dim, config_at(c, "codec.seed").get<std::uint64_t>());
  } else {
    throw ConfigError("codec.mode", "expected 'identity' or 'linear'");
  }

  exp.policy_arch.data_dim = dim;
  exp.policy_arch.hidden = get_widths(c, "policy.hidden");
  exp.policy_arch.temb_dim = get_count(c, "policy.temb_dim", 2);
  exp.policy_arch.cond_dim = get_count(c, "policy.cond_dim", 2);
  if (exp.policy_arch.temb_dim % 2) throw ConfigError("policy.temb_dim", "must be even");
  exp.critic_arch.data_dim = dim;
  exp.critic_arch.temb_dim = exp.policy_arch.temb_dim;
  exp.critic_arch.cond_dim = exp.policy_arch.cond_dim;
  exp.critic_arch.hidden = get_widths(c, "critic.hidden");
  exp.critic_arch.lookahead_input = config_at(c, "critic.lookahead_input").get<bool>();
  exp.critic_arch.lookahead_clip = get_number(c, "reward.lf_weight_clip");

  exp.encoder = FeatureEncoder(dim, get_count(c, "encoder.hidden", 1), get_count(c, "encoder.dim", 1),
                               config_at(c, "encoder.seed").get<std::uint64_t>());

  RewardSpec& r = exp.train.reward;
  r.kind = parse_field("reward.kind", [&] { return parse_reward_kind(get_string(c, "reward.kind")); });
  for (const auto& comp : config_at(c, "reward.components")) {
    if (!comp.is_string()) throw ConfigError("reward.components", "entries must be reward names");
    r.components.push_back(parse_field("reward.components", [&] { return parse_reward_kind(comp.get<std::string>()); }));
  }
  r.lambda = get_number(c, "reward.lambda");
  r.gamma = get_number(c, "reward.gamma");
  r.target_mode = parse_field("reward.target_mode", [&] { return parse_target_mode(get_string(c, "reward.target_mode")); });
  r.mc_horizon = get_count(c, "reward.mc_horizon", 1);
  r.lf_weight_clip = get_number(c, "reward.lf_weight_clip");
  r.feature_t_frac = get_number(c, "reward.feature_t_frac");
  if (!(r.lambda >= 0.0)) throw ConfigError("reward.lambda", "must be >= 0");
  if (!(r.gamma >= 0.0 && r.gamma <= 1.0)) throw ConfigError("reward.gamma", "must lie in [0,1]");
  if (!(r.lf_weight_clip > 0.0)) throw ConfigError("reward.lf_weight_clip", "must be > 0");
  if (!(r.feature_t_frac > 0.0 && r.feature_t_frac <= 1.0)) {
    throw ConfigError("reward.feature_t_frac", "must lie in (0,1]");
  }
  parse_field("reward.components", [&] { r.validate(); return 0; });

  TrainConfig& t = exp.train;
  t.seed = config_at(c, "seed").get<std::uint64_t>();
  t.steps = get_count(c, "trainer.steps", 0);
  t.batch_size = get_count(c, "trainer.batch_size", 1);
  t.lr_policy = get_number(c, "trainer.lr_policy");
  t.lr_critic = get_number(c, "trainer.lr_critic");
  t.momentum = get_number(c, "trainer.momentum");
  t.policy_objective = parse_field("trainer.policy_objective", [&] {
    return parse_policy_objective(get_string(c, "trainer.policy_objective"));
  });
  t.param_mask = get_string(c, "trainer.param_mask");
  t.eval_every = get_count(c, "trainer.eval_every", 1);
  t.critic_steps_per_policy_step = get_count(c, "trainer.critic_steps_per_policy_step", 1);
  t.explore_std = get_number(c, "trainer.explore_std");
  t.freeze_embeddings = config_at(c, "trainer.freeze_embeddings").get<bool>();
  t.critic_warmup = get_count(c, "trainer.critic_warmup", 0);
  t.action_grad_clip = get_number(c, "trainer.action_grad_clip");
  if (!(t.action_grad_clip >= 0.0)) throw ConfigError("trainer.action_grad_clip", "must be >= 0 (0 disables)");
  get_count(c, "trainer.checkpoint_every", 0);
  if (!(t.lr_policy > 0.0)) throw ConfigError("trainer.lr_policy", "must be > 0");
  if (!(t.lr_critic > 0.0)) throw ConfigError("trainer.lr_critic", "must be > 0");
  if (!(t.momentum >= 0.0 && t.momentum < 1.0)) throw ConfigError("trainer.momentum", "must lie in [0,1)");
  if (!(t.explore_std >= 0.0)) throw ConfigError("trainer.explore_std", "must be >= 0");
  if (t.param_mask.empty()) throw ConfigError("trainer.param_mask", "must be 'all' or a prefix list");

  get_count(c, "eval.samples_per_cell", 1);
  exp.prepare();
  return exp;
}

std::string config_text(const Json& config) { return config.dump(2) + "\n"; }

}  // namespace dpg
