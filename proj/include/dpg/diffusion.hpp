// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpg/tensor.hpp"

namespace dpg {

enum class ScheduleKind { Linear, Cosine };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Per-timestep noise coefficients. Timesteps are zero-based: index 0 is the
/// least noisy step and index T-1 the noisiest.
struct DiffusionSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  std::size_t steps() const { return beta.size(); }
};

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end,
                                ScheduleKind kind = ScheduleKind::Linear);

/// Schedule from an explicit beta sequence (each in (0,1)).
DiffusionSchedule schedule_from_betas(std::vector<double> betas);

/// One row per timestep: "t beta alpha alpha_bar", tab separated, with header.
void write_schedule_table(std::ostream& os, const DiffusionSchedule& s);

/// sqrt(abar_t) * x0 + sqrt(1 - abar_t) * z
Tensor forward_diffuse(const Tensor& x0, std::size_t t, const Tensor& z,
                       const DiffusionSchedule& s);

/// (x_t - sqrt(1 - abar_t) * z_hat) / sqrt(abar_t)
Tensor predict_x0(const Tensor& x_t, const Tensor& z_hat, std::size_t t,
                  const DiffusionSchedule& s);

/// Mean over elements of (z - z_hat)^2.
double recon_objective(const Tensor& z, const Tensor& z_hat);

/// Minimum abar accepted by predict_x0.
inline constexpr double kMinAlphaBar = 1e-12;

/// Latent codec. Identity runs diffusion in data space; linear applies a fixed
/// orthonormal map so the decode path is exercised.
class LatentCodec {
 public:
  enum class Mode { Identity, Linear };

  LatentCodec() = default;
  static LatentCodec identity() { return LatentCodec(); }
  static LatentCodec linear(std::size_t dim, std::uint64_t seed);

  Mode mode() const { return mode_; }
  Tensor encode(const Tensor& x) const;
  Tensor decode(const Tensor& latent) const;

 private:
  Mode mode_ = Mode::Identity;
  std::size_t dim_ = 0;
  std::vector<double> basis_;  // row-major orthonormal [dim, dim]
};

}  // namespace dpg
