// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/run.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <algorithm>
#include <map>
#include <sstream>

#include "dpg/checkpoint.hpp"

namespace dpg {

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw RunIoError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* reward_column(const RewardSpec& spec) {
  switch (spec.kind) {
    case RewardKind::Recon: return "recon";
    case RewardKind::LookForward: return "look_forward";
    case RewardKind::FeatureSim: return "feature_sim";
    case RewardKind::Composite: return "composite";
  }
  return "?";
}

}  // namespace

fs::path default_out_root() {
  if (const char* env = std::getenv(kOutRootEnv); env && *env) return env;
  return "runs";
}

std::string checkpoint_name(std::size_t step) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "step_%08zu.json", step);
  return buf;
}

RunResult execute_run(const Json& config, const fs::path& dir) {
  const RunMode mode = run_mode(config);
  const Experiment exp = build_experiment(config);
  const auto ck_every = config_at(config, "trainer.checkpoint_every").get<std::size_t>();
  const bool eval_live = config_at(config, "eval.during_training").get<bool>();
  const auto eval_seed = config_at(config, "eval.seed").get<std::uint64_t>();
  const auto per_cell = config_at(config, "eval.samples_per_cell").get<std::size_t>();

  if (fs::exists(dir / "config.json")) {
    throw RunIoError("run directory already holds a run: " + dir.string());
  }
  std::error_code ec;
  fs::create_directories(dir / "checkpoints", ec);
  if (ec) throw RunIoError("cannot create " + dir.string() + ": " + ec.message());

  open_out(dir / "config.json") << config_text(config);
  {
    auto out = open_out(dir / "dataset.txt");
    write_dataset(out, exp.concepts);
  }
  auto metrics = open_out(dir / "metrics.jsonl");
  auto trace = open_out(dir / "reward_trace.tsv");
  trace << "step\tt\tkind\tvalue\n";

  std::optional<ContextProbe> probe;
  if (eval_live) probe = train_probe(exp, config_at(config, "eval.probe_seed").get<std::uint64_t>());

  const std::size_t total = exp.train.steps;
  auto hook = [&](const RunState& run, MetricRow& row) {
    // Fixed probe batch: same states at every point so the trace is comparable over time.
    RngStream tr(exp.train.seed, "trace");
    const TrainBatch batch = draw_batch(exp, run.embedding, tr);
    const LatentBatch states{batch.x_t, batch.t, condition_values(run.embedding, batch.tokens)};
    const Tensor action = run.policy.predict(states);
    const auto rewards = immediate_rewards(exp, batch, action, batch.x_t, batch.t);
    double mean_reward = 0.0;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      trace << row.step << '\t' << batch.t[i] << '\t' << reward_column(exp.train.reward) << '\t'
            << fmt(rewards[i]) << '\n';
      mean_reward += rewards[i] / static_cast<double>(rewards.size());
    }
    row.set("trace_reward", mean_reward);
    if (probe) {
      const EvalReport rep = make_report(run, exp, *probe, eval_seed, per_cell);
      row.set("image_alignment", rep.image_alignment);
      row.set("condition_alignment", rep.condition_alignment);
    }
    Json line;
    line["step"] = row.step;
    for (const auto& [name, value] : row.values) line[name] = value;
    metrics << line.dump() << '\n' << std::flush;
    trace << std::flush;
    if (row.step == 0 || row.step == total || (ck_every > 0 && row.step % ck_every == 0)) {
      save_checkpoint(dir / "checkpoints" / checkpoint_name(row.step), run, exp.train.seed);
    }
  };

  RunResult result;
  result.dir = dir;
  result.run = mode == RunMode::Dpg ? train_dpg(exp, hook) : train_baseline(exp, hook);
  result.final_metrics = result.run.metrics.back();
  if (!metrics || !trace) throw RunIoError("write failed under " + dir.string());
  return result;
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  std::optional<fs::path> best;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(run_dir / "checkpoints", ec)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("step_", 0) != 0 || entry.path().extension() != ".json") continue;
    if (!best || name > best->filename().string()) best = entry.path();
  }
  return best;
}

void write_plots(const fs::path& run_dir) {
  std::ifstream in(run_dir / "metrics.jsonl");
  if (!in) throw RunIoError("no metrics.jsonl in " + run_dir.string());
  std::map<std::string, std::vector<std::pair<std::size_t, double>>> series;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json row = Json::parse(line);
    const auto step = row.at("step").get<std::size_t>();
    for (auto it = row.begin(); it != row.end(); ++it) {
      if (it.key() == "step" || !it.value().is_number()) continue;
      series[it.key()].emplace_back(step, it.value().get<double>());
    }
  }
  fs::create_directories(run_dir / "plots");
  for (const auto& [name, points] : series) {
    auto out = open_out(run_dir / "plots" / (name + ".tsv"));
    out << "step\t" << name << '\n';
    for (const auto& [step, v] : points) out << step << '\t' << fmt(v) << '\n';
  }
}

EvalOutput evaluate_run(const fs::path& run_dir, const fs::path& checkpoint, std::uint64_t seed) {
  if (!fs::exists(checkpoint)) throw RunIoError("checkpoint not found: " + checkpoint.string());
  const Json config = load_config(run_dir / "config.json");
  const Experiment exp = build_experiment(config);
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.run.policy.arch().data_dim != exp.policy_arch.data_dim ||
      ck.run.embedding.num_concepts() != exp.concepts.size()) {
    throw CheckpointError("checkpoint does not match the run's configuration");
  }
  const ContextProbe probe = train_probe(exp, config_at(config, "eval.probe_seed").get<std::uint64_t>());
  EvalOutput out;
  out.report = make_report(ck.run, exp, probe, seed,
                           config_at(config, "eval.samples_per_cell").get<std::size_t>());
  fs::create_directories(run_dir / "eval");
  out.report_path = run_dir / "eval" /
                    ("report_step" + std::to_string(ck.run.step) + "_seed" + std::to_string(seed) + ".txt");
  {
    auto os = open_out(out.report_path);
    write_report(os, out.report);
  }
  write_plots(run_dir);
  return out;
}

Grid parse_grid(const std::vector<std::string>& specs) {
  if (specs.empty()) throw ConfigError("grid", "empty grid");
  Grid grid;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw ConfigError(spec, "grid entries look like key=v1,v2");
    }
    std::vector<std::string> values;
    std::stringstream ss(spec.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) {
      if (v.empty()) throw ConfigError(spec.substr(0, eq), "empty grid value");
      values.push_back(v);
    }
    grid.emplace_back(spec.substr(0, eq), std::move(values));
  }
  return grid;
}

std::vector<AblationCell> run_ablation(const Json& base, const Grid& grid, const fs::path& out) {
  if (grid.empty()) throw ConfigError("grid", "empty grid");
  // Expand and validate every cell before any training starts.
  std::vector<std::vector<std::pair<std::string, std::string>>> cells{{}};
  for (const auto& [key, values] : grid) {
    config_at(base, key);
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        auto c = cell;
        c.emplace_back(key, v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  std::vector<Json> configs;
  for (const auto& cell : cells) {
    Json cfg = base;
    for (const auto& [k, v] : cell) apply_override(cfg, k + "=" + v);
    build_experiment(cfg);
    configs.push_back(std::move(cfg));
  }

  std::vector<AblationCell> results;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", i);
    results.push_back({cells[i], execute_run(configs[i], out / name)});
  }

  std::vector<std::string> columns;
  for (const auto& r : results) {
    for (const auto& [name, v] : r.result.final_metrics.values) {
      if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
    }
  }
  auto table = open_out(out / "comparison.tsv");
  table << "cell";
  for (const auto& [key, values] : grid) table << '\t' << key;
  for (const auto& c : columns) table << '\t' << c;
  table << '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", i);
    table << name;
    for (const auto& [k, v] : results[i].assignment) table << '\t' << v;
    const MetricRow& row = results[i].result.final_metrics;
    for (const auto& c : columns) {
      bool found = false;
      for (const auto& [n, v] : row.values) {
        if (n == c) { table << '\t' << fmt(v); found = true; break; }
      }
      if (!found) table << "\t-";
    }
    table << '\n';
  }
  return results;
}

}  // namespace dpg
