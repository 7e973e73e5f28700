// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration: a JSON document (comments allowed) layered over built-in
// defaults, with dotted-key overrides. The resolved document is what a run
// directory snapshots.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpg/trainer.hpp"

namespace dpg {

using Json = nlohmann::ordered_json;

/// Configuration problem tied to one dotted key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

Json default_config();

/// Parses JSON text with comments and merges it over the defaults.
Json resolve_config(const std::string& text);
Json load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value". The value is parsed as JSON when possible and
/// otherwise taken as a string; it must match the type of the existing key.
void apply_override(Json& config, const std::string& assignment);
void apply_overrides(Json& config, const std::vector<std::string>& assignments);

/// Value at a dotted key; throws ConfigError when absent.
const Json& config_at(const Json& config, const std::string& dotted);

enum class RunMode { Dpg, Baseline };
RunMode run_mode(const Json& config);

/// Validates every field and assembles the experiment (data, schedule,
/// architectures, encoder). The first invalid field raises ConfigError.
Experiment build_experiment(const Json& config);

/// Canonical text of a resolved config; this is what gets snapshotted.
std::string config_text(const Json& config);

}  // namespace dpg
