// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Run directories. Layout:
//   config.json                 resolved configuration, rerunnable as-is
//   dataset.txt                 the reference sets the run trained on
//   metrics.jsonl               one JSON object per metric point
//   reward_trace.tsv            step, t, kind, value of a fixed probe batch
//   checkpoints/step_NNNNNNNN.json
//   eval/report_step<k>_seed<s>.txt, plots/<metric>.tsv   (written by eval)

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpg/config.hpp"
#include "dpg/eval.hpp"
#include "dpg/trainer.hpp"

namespace dpg {

namespace fs = std::filesystem;

inline constexpr const char* kOutRootEnv = "DPGDIFF_OUT_ROOT";

/// Filesystem trouble: unwritable output, occupied run directory, missing files.
class RunIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// $DPGDIFF_OUT_ROOT if set, else ./runs.
fs::path default_out_root();

std::string checkpoint_name(std::size_t step);

struct RunResult {
  fs::path dir;
  RunState run;
  MetricRow final_metrics;
};

/// Trains per config into `dir` (created; must not already hold a run).
RunResult execute_run(const Json& config, const fs::path& dir);

/// Latest checkpoint of a run directory, if any.
std::optional<fs::path> latest_checkpoint(const fs::path& run_dir);

struct EvalOutput {
  fs::path report_path;
  EvalReport report;
};

/// Scores a checkpoint with the run's own config, writes the report and
/// refreshes plots/ from metrics.jsonl.
EvalOutput evaluate_run(const fs::path& run_dir, const fs::path& checkpoint, std::uint64_t seed);

/// Columnar plot data: plots/<metric>.tsv with "step\tvalue" rows.
void write_plots(const fs::path& run_dir);

/// key -> candidate values, parsed from "a.b=v1,v2,...".
using Grid = std::vector<std::pair<std::string, std::vector<std::string>>>;
Grid parse_grid(const std::vector<std::string>& specs);

struct AblationCell {
  std::vector<std::pair<std::string, std::string>> assignment;
  RunResult result;
};

/// Cartesian product of the grid over a base config; every cell shares the
/// base seed. Writes cell directories and comparison.tsv under `out`.
std::vector<AblationCell> run_ablation(const Json& base, const Grid& grid, const fs::path& out);

}  // namespace dpg
