// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "dpg/tensor.hpp"

namespace dpg {

/// Counter-based random stream. Every draw is a pure function of
/// (seed, label, counter); advancing the counter is the only state change.
/// Streams with different labels are decorrelated by hashing the label into
/// the key.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string label, std::uint64_t counter = 0);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }
  std::uint64_t counter() const { return counter_; }

  /// Child stream keyed by "<label>/<suffix>", counter reset to zero.
  RngStream fork(const std::string& suffix) const;

  std::uint64_t next_u64();
  /// Uniform in (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  double gaussian();

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// i.i.d. standard normal tensor; advances the stream by one counter per entry.
Tensor draw_gaussian(RngStream& stream, const Shape& shape);

std::uint64_t hash_label(const std::string& label);

}  // namespace dpg
