// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dpg/config.hpp"

namespace fixture {

// Defaults shrunk for fast tests, then the caller's overrides.
inline dpg::Json small_config(const std::vector<std::string>& overrides = {}) {
  dpg::Json cfg = dpg::default_config();
  dpg::apply_overrides(cfg, {"policy.hidden=[32,32]", "data.num_concepts=2", "trainer.steps=20",
                             "trainer.eval_every=10", "trainer.critic_warmup=0"});
  dpg::apply_overrides(cfg, overrides);
  return cfg;
}

inline dpg::Experiment small_experiment(const std::vector<std::string>& overrides = {}) {
  dpg::Experiment exp = dpg::build_experiment(small_config(overrides));
  exp.prepare();
  return exp;
}

}  // namespace fixture
