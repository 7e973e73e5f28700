// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/rewards.hpp"

#include <cmath>
#include <stdexcept>

#include "dpg/rng.hpp"

namespace dpg {

RewardKind parse_reward_kind(const std::string& name) {
  if (name == "recon") return RewardKind::Recon;
  if (name == "look_forward") return RewardKind::LookForward;
  if (name == "feature_sim") return RewardKind::FeatureSim;
  if (name == "composite") return RewardKind::Composite;
  throw std::invalid_argument("unknown reward kind '" + name + "'");
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::Recon: return "recon";
    case RewardKind::LookForward: return "look_forward";
    case RewardKind::FeatureSim: return "feature_sim";
    case RewardKind::Composite: return "composite";
  }
  return "?";
}

TargetMode parse_target_mode(const std::string& name) {
  if (name == "monte_carlo") return TargetMode::MonteCarlo;
  if (name == "discounted") return TargetMode::Discounted;
  throw std::invalid_argument("unknown target mode '" + name + "'");
}

std::string to_string(TargetMode mode) {
  return mode == TargetMode::MonteCarlo ? "monte_carlo" : "discounted";
}

void RewardSpec::validate() const {
  if (kind == RewardKind::Composite) {
    if (components.empty()) throw std::invalid_argument("composite reward needs components");
    for (auto c : components) {
      if (c == RewardKind::Composite) throw std::invalid_argument("composite reward cannot nest");
    }
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0,1]");
  if (!(lf_weight_clip > 0.0)) throw std::invalid_argument("lf_weight_clip must be > 0");
  if (mc_horizon == 0) throw std::invalid_argument("mc_horizon must be >= 1");
  if (!(feature_t_frac > 0.0 && feature_t_frac <= 1.0)) {
    throw std::invalid_argument("feature_t_frac must lie in (0,1]");
  }
}

FeatureEncoder::FeatureEncoder(std::size_t input_dim, std::size_t hidden, std::size_t output_dim,
                               std::uint64_t seed)
    : input_dim_(input_dim), output_dim_(output_dim) {
  RngStream rng(seed, "feature_encoder");
  w1_ = Tensor(Shape{input_dim, hidden});
  b1_ = Tensor(Shape{hidden});
  w2_ = Tensor(Shape{hidden, output_dim});
  const double s1 = 1.5 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : w1_.data()) v = s1 * rng.gaussian();
  for (double& v : b1_.data()) v = 0.5 * rng.gaussian();
  for (double& v : w2_.data()) v = s2 * rng.gaussian();
}

Var FeatureEncoder::embed(Tape& tape, Var x) const {
  Var h = ad::tanh(ad::add_bias(ad::matmul(x, tape.constant(w1_)), tape.constant(b1_)));
  return ad::normalize_rows(ad::matmul(h, tape.constant(w2_)));
}

Tensor FeatureEncoder::embed_raw(const Tensor& x) const {
  Tape tape(false);
  Var xv = tape.constant(x.rank() == 1 ? x.reshaped(Shape{1, x.size()}) : x);
  Var h = ad::tanh(ad::add_bias(ad::matmul(xv, tape.constant(w1_)), tape.constant(b1_)));
  return ad::matmul(h, tape.constant(w2_)).value();
}

Tensor FeatureEncoder::embed_rows(const Tensor& x) const {
  Tape tape(false);
  return embed(tape, tape.constant(x.rank() == 1 ? x.reshaped(Shape{1, x.size()}) : x)).value();
}

Tensor FeatureEncoder::embed(const Tensor& x) const {
  return embed_rows(x).reshaped(Shape{output_dim_});
}

double recon_reward(const Tensor& z, const Tensor& z_hat) { return -recon_objective(z, z_hat); }

double look_forward_weight(std::size_t t, const DiffusionSchedule& s, double clip) {
  if (!(clip > 0.0)) throw std::invalid_argument("look-forward clip must be > 0");
  const double abar = s.alpha_bar.at(t);
  return std::min((1.0 - abar) / abar, clip);
}

double look_forward_reward(const Tensor& x0, const Tensor& x_t, const Tensor& z_hat, std::size_t t,
                           const DiffusionSchedule& s, double clip) {
  require_same_shape(x0, x_t, "look_forward_reward");
  require_same_shape(x_t, z_hat, "look_forward_reward");
  const double w = look_forward_weight(t, s, clip);
  const double abar = s.alpha_bar[t];
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  double err = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double z = (x_t[i] - a * x0[i]) / b;
    const double d = z_hat[i] - z;
    err += d * d;
  }
  return -w * err / static_cast<double>(x0.size());
}

double feature_sim_reward(const Tensor& x0_hat, const Tensor& ref_embeddings,
                          const FeatureEncoder& enc, const LatentCodec& codec) {
  if (ref_embeddings.size() == 0) throw std::invalid_argument("feature_sim_reward: no references");
  const Tensor k = enc.embed(codec.decode(x0_hat));
  const std::size_t n = ref_embeddings.rows();
  double sim = 0.0;
  for (std::size_t r = 0; r < n; ++r) sim += dot(k.data(), ref_embeddings.row(r));
  return -(1.0 - sim / static_cast<double>(n));
}

double feature_sim_reward(const Tensor& x0_hat, const ReferenceSet& refs, const FeatureEncoder& enc,
                          const LatentCodec& codec) {
  if (refs.samples.empty()) throw std::invalid_argument("feature_sim_reward: empty reference set");
  return feature_sim_reward(x0_hat, enc.embed_rows(stack_rows(refs.samples)), enc, codec);
}

double mc_target(std::span<const double> rewards_by_step) {
  if (rewards_by_step.empty()) throw std::invalid_argument("mc_target: empty reward list");
  double total = 0.0;
  for (double r : rewards_by_step) total += r;
  return total;
}

double discounted_target(double immediate, double next_q, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0,1]");
  return immediate + gamma * next_q;
}

Var recon_reward(Var z_hat, const Tensor& z) {
  Tape& tape = *z_hat.tape;
  const double inv = 1.0 / static_cast<double>(z_hat.value().cols());
  return ad::scale(ad::sum_rows(ad::square(ad::sub(z_hat, tape.constant(z)))), -inv);
}

Var look_forward_reward(Var z_hat, const Tensor& z, std::span<const std::size_t> t,
                        const DiffusionSchedule& s, double clip) {
  Tape& tape = *z_hat.tape;
  const double inv = 1.0 / static_cast<double>(z_hat.value().cols());
  std::vector<double> w(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) w[r] = -look_forward_weight(t[r], s, clip) * inv;
  return ad::scale_rows(ad::sum_rows(ad::square(ad::sub(z_hat, tape.constant(z)))), std::move(w));
}

Var feature_sim_reward(Var x0_hat, const Tensor& ref_embeddings, const FeatureEncoder& enc) {
  Tape& tape = *x0_hat.tape;
  const std::size_t n = ref_embeddings.rows();
  const std::size_t f = ref_embeddings.cols();
  Tensor refs_t(Shape{f, n});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) refs_t.at(c, r) = ref_embeddings.at(r, c);
  }
  Var sims = ad::matmul(enc.embed(tape, x0_hat), tape.constant(std::move(refs_t)));
  Var mean_sim = ad::scale(ad::sum_rows(sims), 1.0 / static_cast<double>(n));
  Tensor ones(mean_sim.value().shape(), 1.0);
  return ad::sub(mean_sim, tape.constant(std::move(ones)));
}

}  // namespace dpg
