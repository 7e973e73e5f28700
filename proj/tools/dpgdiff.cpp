// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// dpgdiff: train, ablate, eval, dump-dataset, show-schedule.
//
// Exit codes: 0 ok, 2 usage, 3 config, 4 io (incl. missing checkpoint),
// 5 runtime (incl. divergence). Errors go to stderr as "error[<category>]: ...".

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dpg/checkpoint.hpp"
#include "dpg/config.hpp"
#include "dpg/run.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 2, kConfig = 3, kIo = 4, kRuntime = 5 };

int fail(Exit code, const char* category, const std::string& msg) {
  std::cerr << "error[" << category << "]: " << msg << '\n';
  return code;
}

struct ConfigArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.config, "JSON config (comments allowed); defaults when omitted");
  cmd->add_option("--set", a.sets, "override KEY=VALUE, repeatable")->take_all();
  cmd->add_option("--seed", a.seed, "training seed (sets the top-level 'seed' key)");
}

dpg::Json resolve(const ConfigArgs& a) {
  if (!a.config.empty() && !dpg::fs::is_regular_file(a.config)) {
    throw dpg::RunIoError("cannot read config " + a.config);
  }
  dpg::Json cfg = a.config.empty() ? dpg::default_config() : dpg::load_config(a.config);
  dpg::apply_overrides(cfg, a.sets);
  if (a.seed) cfg["seed"] = *a.seed;
  return cfg;
}

// Name derived from the config so identical requests land in the same place.
std::string run_name(const dpg::Json& cfg) {
  const std::string text = dpg::config_text(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-seed%llu-%08llx", cfg["mode"].get<std::string>().c_str(),
                static_cast<unsigned long long>(cfg["seed"].get<std::uint64_t>()),
                static_cast<unsigned long long>(h & 0xffffffffULL));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic policy gradient fine-tuning of small diffusion models"};
  app.require_subcommand(1);

  ConfigArgs train_args;
  std::string train_out;
  auto* train = app.add_subcommand("train", "train one run into a run directory");
  add_config_flags(train, train_args);
  train->add_option("--out", train_out, "run directory (default: $DPGDIFF_OUT_ROOT/<name>)");

  ConfigArgs ablate_args;
  std::string ablate_out;
  std::vector<std::string> grid_specs;
  auto* ablate = app.add_subcommand("ablate", "Cartesian grid of runs plus a comparison table");
  add_config_flags(ablate, ablate_args);
  ablate->add_option("--grid", grid_specs, "KEY=V1,V2,..., repeatable")->take_all();
  ablate->add_option("--out", ablate_out, "output directory");

  std::string eval_run;
  std::string eval_ck;
  std::optional<std::uint64_t> eval_seed;
  auto* eval = app.add_subcommand("eval", "score a checkpoint and write plot data");
  eval->add_option("--run", eval_run, "run directory")->required();
  eval->add_option("--checkpoint", eval_ck, "checkpoint file (default: latest in the run)");
  eval->add_option("--seed", eval_seed, "sampling seed (default: eval.seed of the run)");

  ConfigArgs dump_args;
  std::string dump_out;
  auto* dump = app.add_subcommand("dump-dataset", "write the configured reference sets");
  add_config_flags(dump, dump_args);
  dump->add_option("--out", dump_out, "output file (default: stdout)");

  ConfigArgs sched_args;
  auto* sched = app.add_subcommand("show-schedule", "print the noise schedule table");
  add_config_flags(sched, sched_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train) {
      const dpg::Json cfg = resolve(train_args);
      dpg::build_experiment(cfg);
      const dpg::fs::path dir = train_out.empty() ? dpg::default_out_root() / run_name(cfg) : dpg::fs::path(train_out);
      const auto res = dpg::execute_run(cfg, dir);
      std::cout << res.dir.string() << '\n';
    } else if (*ablate) {
      const dpg::Json cfg = resolve(ablate_args);
      const auto grid = dpg::parse_grid(grid_specs);
      const dpg::fs::path dir = ablate_out.empty() ? dpg::default_out_root() / ("ablate-" + run_name(cfg)) : dpg::fs::path(ablate_out);
      dpg::run_ablation(cfg, grid, dir);
      std::ifstream table(dir / "comparison.tsv");
      std::cout << table.rdbuf();
    } else if (*eval) {
      dpg::fs::path ck = eval_ck;
      if (ck.empty()) {
        const auto latest = dpg::latest_checkpoint(eval_run);
        if (!latest) return fail(kIo, "io", "no checkpoint in " + eval_run);
        ck = *latest;
      }
      std::uint64_t seed = 0;
      if (eval_seed) {
        seed = *eval_seed;
      } else {
        const auto cfg = dpg::load_config(dpg::fs::path(eval_run) / "config.json");
        seed = dpg::config_at(cfg, "eval.seed").get<std::uint64_t>();
      }
      const auto out = dpg::evaluate_run(eval_run, ck, seed);
      std::cout << out.report_path.string() << '\n';
      dpg::write_report(std::cout, out.report);
    } else if (*dump) {
      const dpg::Experiment exp = dpg::build_experiment(resolve(dump_args));
      if (dump_out.empty()) {
        dpg::write_dataset(std::cout, exp.concepts);
      } else {
        std::ofstream out(dump_out);
        if (!out) return fail(kIo, "io", "cannot write " + dump_out);
        dpg::write_dataset(out, exp.concepts);
      }
    } else if (*sched) {
      const dpg::Experiment exp = dpg::build_experiment(resolve(sched_args));
      dpg::write_schedule_table(std::cout, exp.schedule);
    }
  } catch (const dpg::ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const dpg::RunIoError& e) {
    return fail(kIo, "io", e.what());
  } catch (const dpg::CheckpointError& e) {
    return fail(kIo, "io", e.what());
  } catch (const dpg::TrainingDiverged& e) {
    return fail(kRuntime, "diverged", e.what());
  } catch (const std::exception& e) {
    return fail(kRuntime, "runtime", e.what());
  }
  return kOk;
}
