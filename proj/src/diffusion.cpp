// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/diffusion.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "dpg/rng.hpp"

namespace dpg {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw std::invalid_argument("unknown schedule kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Linear ? "linear" : "cosine";
}

DiffusionSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw std::invalid_argument("schedule needs at least one step");
  DiffusionSchedule s;
  s.beta = std::move(betas);
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double running = 1.0;
  for (std::size_t t = 0; t < s.beta.size(); ++t) {
    const double b = s.beta[t];
    if (!(b > 0.0 && b < 1.0)) {
      throw std::invalid_argument("beta[" + std::to_string(t) + "] must lie in (0,1)");
    }
    s.alpha[t] = 1.0 - b;
    running *= s.alpha[t];
    s.alpha_bar[t] = running;
  }
  return s;
}

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end,
                                ScheduleKind kind) {
  if (steps < 2) throw std::invalid_argument("schedule needs T >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("schedule requires 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  if (kind == ScheduleKind::Linear) {
    for (std::size_t t = 0; t < steps; ++t) {
      betas[t] = beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                                  static_cast<double>(steps - 1);
    }
  } else {
    // Cosine alpha_bar curve with offset 0.008; betas clamped into
    // [beta_start, beta_end] so the bounds keep their meaning.
    auto f = [steps](double t) {
      const double u = (t / static_cast<double>(steps) + 0.008) / 1.008;
      const double c = std::cos(u * std::numbers::pi / 2.0);
      return c * c;
    };
    for (std::size_t t = 0; t < steps; ++t) {
      const double b = 1.0 - f(static_cast<double>(t + 1)) / f(static_cast<double>(t));
      betas[t] = std::clamp(b, beta_start, beta_end);
    }
  }
  return schedule_from_betas(std::move(betas));
}

void write_schedule_table(std::ostream& os, const DiffusionSchedule& s) {
  os << "t\tbeta\talpha\talpha_bar\n";
  char buf[128];
  for (std::size_t t = 0; t < s.steps(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\n", t, s.beta[t], s.alpha[t],
                  s.alpha_bar[t]);
    os << buf;
  }
}

static void check_timestep(std::size_t t, const DiffusionSchedule& s) {
  if (t >= s.steps()) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside schedule of " +
                            std::to_string(s.steps()) + " steps");
  }
}

Tensor forward_diffuse(const Tensor& x0, std::size_t t, const Tensor& z,
                       const DiffusionSchedule& s) {
  require_same_shape(x0, z, "forward_diffuse");
  check_timestep(t, s);
  const double a = std::sqrt(s.alpha_bar[t]);
  const double b = std::sqrt(1.0 - s.alpha_bar[t]);
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * z[i];
  return out;
}

Tensor predict_x0(const Tensor& x_t, const Tensor& z_hat, std::size_t t,
                  const DiffusionSchedule& s) {
  require_same_shape(x_t, z_hat, "predict_x0");
  check_timestep(t, s);
  const double abar = s.alpha_bar[t];
  if (abar < kMinAlphaBar) throw std::domain_error("predict_x0: alpha_bar is numerically zero");
  const double inv = 1.0 / std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv * (x_t[i] - b * z_hat[i]);
  return out;
}

double recon_objective(const Tensor& z, const Tensor& z_hat) {
  return mean_squared_diff(z, z_hat);
}

LatentCodec LatentCodec::linear(std::size_t dim, std::uint64_t seed) {
  // Gram-Schmidt on a Gaussian matrix gives an orthonormal basis, so the
  // inverse is the transpose.
  RngStream rng(seed, "codec");
  std::vector<std::vector<double>> rows;
  while (rows.size() < dim) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.gaussian();
    for (const auto& r : rows) {
      double d = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d += v[i] * r[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= d * r[i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (double& x : v) x /= n;
    rows.push_back(std::move(v));
  }
  LatentCodec c;
  c.mode_ = Mode::Linear;
  c.dim_ = dim;
  for (const auto& r : rows) c.basis_.insert(c.basis_.end(), r.begin(), r.end());
  return c;
}

Tensor LatentCodec::encode(const Tensor& x) const {
  if (mode_ == Mode::Identity) return x;
  if (x.size() != dim_) throw std::invalid_argument("codec: dimension mismatch");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < dim_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += basis_[i * dim_ + j] * x[j];
    out[i] = s;
  }
  return out;
}

Tensor LatentCodec::decode(const Tensor& latent) const {
  if (mode_ == Mode::Identity) return latent;
  if (latent.size() != dim_) throw std::invalid_argument("codec: dimension mismatch");
  Tensor out(latent.shape());
  for (std::size_t j = 0; j < dim_; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += basis_[i * dim_ + j] * latent[i];
    out[j] = s;
  }
  return out;
}

}  // namespace dpg
