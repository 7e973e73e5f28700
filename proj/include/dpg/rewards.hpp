// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Reward functions and critic regression targets.
//
// Sign convention: every reward is a negated cost, so higher is better and a
// perfect prediction scores exactly 0. Squared norms are mean-squared over
// the elements of one sample, matching recon_objective.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpg/autodiff.hpp"
#include "dpg/concepts.hpp"
#include "dpg/diffusion.hpp"
#include "dpg/tensor.hpp"

namespace dpg {

enum class RewardKind { Recon, LookForward, FeatureSim, Composite };
enum class TargetMode { MonteCarlo, Discounted };

RewardKind parse_reward_kind(const std::string& name);
std::string to_string(RewardKind kind);
TargetMode parse_target_mode(const std::string& name);
std::string to_string(TargetMode mode);

struct RewardSpec {
  RewardKind kind = RewardKind::LookForward;
  /// Summed base rewards when kind == Composite.
  std::vector<RewardKind> components;
  /// Weight of the critic term in the composite policy objective.
  double lambda = 1.0;
  /// Discount of the bootstrapped target; unused by Monte-Carlo targets.
  double gamma = 0.0;
  TargetMode target_mode = TargetMode::Discounted;
  /// Number of most recent trajectory steps summed by the Monte-Carlo target.
  std::size_t mc_horizon = 8;
  double lf_weight_clip = 10.0;
  /// feature_sim is scored only when t / T <= this fraction.
  double feature_t_frac = 0.5;

  void validate() const;
};

/// Frozen random two-layer projection with unit-normalized output.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  FeatureEncoder(std::size_t input_dim, std::size_t hidden, std::size_t output_dim,
                 std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  /// Embeddings before normalization; [B, F] for [B, d] input.
  Tensor embed_raw(const Tensor& x) const;
  /// Unit-norm embedding of one sample.
  Tensor embed(const Tensor& x) const;
  /// Unit-norm embeddings, one row per input row.
  Tensor embed_rows(const Tensor& x) const;
  /// Differentiable route used by gradient checks.
  Var embed(Tape& tape, Var x) const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  Tensor w1_, b1_, w2_;
};

double recon_reward(const Tensor& z, const Tensor& z_hat);

/// (1 - abar_t) / abar_t, capped at `clip`.
double look_forward_weight(std::size_t t, const DiffusionSchedule& s, double clip);

/// -min(w_t, clip) * ||z_hat - z||^2 where z is recovered from (x0, x_t).
double look_forward_reward(const Tensor& x0, const Tensor& x_t, const Tensor& z_hat, std::size_t t,
                           const DiffusionSchedule& s,
                           double clip = std::numeric_limits<double>::infinity());

/// -(1 - mean_ref <k_hat, k_ref>) on decoded, unit-normalized embeddings.
double feature_sim_reward(const Tensor& x0_hat, const ReferenceSet& refs, const FeatureEncoder& enc,
                          const LatentCodec& codec = {});
/// Same with reference embeddings precomputed as rows of `ref_embeddings`.
double feature_sim_reward(const Tensor& x0_hat, const Tensor& ref_embeddings,
                          const FeatureEncoder& enc, const LatentCodec& codec = {});

double mc_target(std::span<const double> rewards_by_step);
double discounted_target(double immediate, double next_q, double gamma);

// Differentiable forms over a batch of actions z_hat [B, d]; one reward per row, [B,1].
Var recon_reward(Var z_hat, const Tensor& z);
Var look_forward_reward(Var z_hat, const Tensor& z, std::span<const std::size_t> t,
                        const DiffusionSchedule& s, double clip);
Var feature_sim_reward(Var x0_hat, const Tensor& ref_embeddings, const FeatureEncoder& enc);

}  // namespace dpg
