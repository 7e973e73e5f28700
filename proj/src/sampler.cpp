// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace dpg {

SampleMode parse_sample_mode(const std::string& name) {
  if (name == "ancestral") return SampleMode::Ancestral;
  if (name == "deterministic") return SampleMode::Deterministic;
  throw std::invalid_argument("unknown sample mode '" + name + "'");
}

double ancestral_sigma(const DiffusionSchedule& s, std::size_t t) {
  if (t == 0) return 0.0;
  // Posterior variance of q(x_{t-1} | x_t, x_0).
  const double var = s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]);
  return std::sqrt(var);
}

Tensor sample_batch(const PolicyNet& policy, const Tensor& cond, const DiffusionSchedule& s,
                    RngStream& stream, SampleMode mode) {
  Tensor start = draw_gaussian(stream, Shape{cond.rows(), policy.arch().data_dim});
  return denoise(policy, std::move(start), cond, s, stream, mode);
}

Tensor denoise(const PolicyNet& policy, Tensor x_start, const Tensor& cond,
               const DiffusionSchedule& s, RngStream& stream, SampleMode mode) {
  const std::size_t rows = cond.rows();
  if (x_start.rows() != rows || x_start.cols() != policy.arch().data_dim) {
    throw std::invalid_argument("denoise: start shape " + shape_str(x_start.shape()) +
                                " does not match condition rows / data dim");
  }
  LatentBatch batch{std::move(x_start), std::vector<std::size_t>(rows), cond};
  for (std::size_t t = s.steps(); t-- > 0;) {
    std::fill(batch.t.begin(), batch.t.end(), t);
    const Tensor z_hat = policy.predict(batch);
    Tensor& x = batch.x;
    if (mode == SampleMode::Deterministic) {
      Tensor x0 = predict_x0(x, z_hat, t, s);
      if (t == 0) return x0;
      const double a = std::sqrt(s.alpha_bar[t - 1]);
      const double b = std::sqrt(1.0 - s.alpha_bar[t - 1]);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * x0[i] + b * z_hat[i];
    } else {
      const double inv = 1.0 / std::sqrt(s.alpha[t]);
      const double coef = s.beta[t] / std::sqrt(1.0 - s.alpha_bar[t]);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = inv * (x[i] - coef * z_hat[i]);
      if (t > 0) {
        const double sigma = ancestral_sigma(s, t);
        const Tensor noise = draw_gaussian(stream, x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += sigma * noise[i];
      }
    }
  }
  return batch.x;
}

Tensor sample(const PolicyNet& policy, const ConditionEmbedding& cond, const DiffusionSchedule& s,
              RngStream& stream, SampleMode mode) {
  const Tensor row = cond.vector.reshaped(Shape{1, cond.vector.size()});
  return sample_batch(policy, row, s, stream, mode).reshaped(Shape{policy.arch().data_dim});
}

}  // namespace dpg
