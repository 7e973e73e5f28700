// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Versioned JSON checkpoint: architecture descriptors, every named parameter
// and the (seed, step) pair that keys the trainer's counter-based streams.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "dpg/trainer.hpp"

namespace dpg {

inline constexpr const char* kCheckpointFormat = "dpgdiff-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  RunState run;
  std::uint64_t seed = 0;
};

std::string checkpoint_text(const RunState& run, std::uint64_t seed);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const RunState& run, std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dpg
