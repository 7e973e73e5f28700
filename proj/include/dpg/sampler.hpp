// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dpg/diffusion.hpp"
#include "dpg/networks.hpp"
#include "dpg/rng.hpp"

namespace dpg {

enum class SampleMode {
  Ancestral,      // DDPM posterior steps with fresh noise
  Deterministic,  // DDIM with eta = 0; only the starting noise is random
};

SampleMode parse_sample_mode(const std::string& name);

/// Generates one clean sample per row of `cond` ([B, cond_dim]) starting from
/// x_{T-1} ~ N(0, I). Output is [B, data_dim].
Tensor sample_batch(const PolicyNet& policy, const Tensor& cond, const DiffusionSchedule& s,
                    RngStream& stream, SampleMode mode);

/// Runs the reverse chain from a given x_{T-1}; the stream is only used for
/// ancestral noise.
Tensor denoise(const PolicyNet& policy, Tensor x_start, const Tensor& cond,
               const DiffusionSchedule& s, RngStream& stream, SampleMode mode);

Tensor sample(const PolicyNet& policy, const ConditionEmbedding& cond, const DiffusionSchedule& s,
              RngStream& stream, SampleMode mode);

/// Standard deviation of the ancestral noise injected when stepping from t to t-1.
double ancestral_sigma(const DiffusionSchedule& s, std::size_t t);

}  // namespace dpg
