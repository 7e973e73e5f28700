// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Actor-critic fine-tuning of the denoiser.
//
// Each outer iteration draws a batch of (reference, context, timestep, noise)
// tuples, fits the critic to reward targets and then moves the policy: either
// pure ascent on Q through the action, or the composite objective
// lambda * Q - recon. The reconstruction-only baseline runs the same loop
// with lambda = 0 and no critic.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpg/concepts.hpp"
#include "dpg/diffusion.hpp"
#include "dpg/networks.hpp"
#include "dpg/rewards.hpp"
#include "dpg/rng.hpp"

namespace dpg {

enum class PolicyObjective { Dpg, Composite };
PolicyObjective parse_policy_objective(const std::string& name);
std::string to_string(PolicyObjective objective);

struct TrainConfig {
  std::size_t steps = 10000;
  std::size_t batch_size = 16;
  double lr_policy = 1e-3;
  double lr_critic = 1e-3;
  double momentum = 0.9;
  RewardSpec reward;
  PolicyObjective policy_objective = PolicyObjective::Composite;
  /// "all" or comma-separated parameter-name prefixes that the policy step may change.
  std::string param_mask = "all";
  std::uint64_t seed = 0;
  std::size_t eval_every = 500;
  std::size_t critic_steps_per_policy_step = 1;
  /// Gaussian perturbation of the action used to fit the critic.
  double explore_std = 0.1;
  bool freeze_embeddings = false;
  /// Leading steps in which only the critic learns from its targets; the
  /// policy sees no Q term until the critic has had time to fit.
  std::size_t critic_warmup = 500;
  /// Per-row cap on ||dQ/da|| passed into the policy; 0 disables.
  double action_grad_clip = 10.0;

  void validate() const;
};

/// Everything a run needs besides its mutable networks.
struct Experiment {
  DiffusionSchedule schedule;
  Domain domain = Domain::Mixture2d;
  /// Concepts in the run; the index is the local concept slot of the embedding table.
  std::vector<ReferenceSet> concepts;
  std::size_t num_contexts = kNumContexts;
  PolicyArch policy_arch;
  CriticArch critic_arch;
  FeatureEncoder encoder;
  LatentCodec codec;
  TrainConfig train;
  /// Unit embeddings of each concept's references, one row per sample.
  /// Filled by prepare(); computed on demand when empty.
  std::vector<Tensor> ref_embeddings;

  void prepare();
  Tensor reference_embeddings(std::size_t slot) const;
};

struct MetricRow {
  std::size_t step = 0;
  std::vector<std::pair<std::string, double>> values;

  void set(const std::string& name, double value);
  double get(const std::string& name) const;
};

struct RunState {
  PolicyNet policy;
  EmbeddingTable embedding;
  CriticNet critic;
  std::size_t step = 0;
  std::vector<MetricRow> metrics;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fresh networks from the experiment's seed.
RunState init_run(const Experiment& exp);

/// SGD with classical momentum. Gradients are descent directions.
class Sgd {
 public:
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(ParamList& params, const std::vector<Tensor>& grads, const std::vector<bool>& active);

 private:
  double lr_;
  double momentum_;
  std::vector<Tensor> velocity_;
};

/// Which of `params` a mask descriptor selects.
std::vector<bool> resolve_mask(const ParamList& params, const std::string& mask);

struct TrainBatch {
  std::vector<std::size_t> concept_slot;
  std::vector<std::size_t> reference;
  std::vector<std::size_t> context;
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> t;
  Tensor x0;   // [B, d]
  Tensor z;    // [B, d]
  Tensor x_t;  // [B, d]
};

/// Independent per-sample draws of reference, context, timestep and noise.
TrainBatch draw_batch(const Experiment& exp, const EmbeddingTable& table, RngStream& rng);

/// Condition rows of a batch, as plain values.
Tensor condition_values(const EmbeddingTable& table, std::span<const std::size_t> tokens);

/// Immediate reward of taking `action` at each batch row.
std::vector<double> immediate_rewards(const Experiment& exp, const TrainBatch& batch,
                                      const Tensor& action, const Tensor& x_t,
                                      std::span<const std::size_t> t);

/// Per-row critic regression targets under exp.train.reward.
std::vector<double> critic_targets(const Experiment& exp, const RunState& run,
                                   const TrainBatch& batch, const Tensor& action, RngStream& rng);

struct CriticStepResult {
  double loss = 0.0;
  std::size_t skipped = 0;
};

/// One descent step on mean (Q - target)^2; the loss is measured before the step.
CriticStepResult critic_update(CriticNet& critic, Sgd& opt, const Experiment& exp,
                               const LatentBatch& states, const Tensor& actions,
                               std::span<const double> targets);

/// Gradient of mean_b Q(x_t, pi(x_t)) wrt policy then embedding parameters.
struct PolicyGradient {
  std::vector<Tensor> policy;
  std::vector<Tensor> embedding;
  double mean_q = 0.0;
  double recon_loss = 0.0;
};

/// Ascent direction of (1/B) sum_b (lambda * Q_b - recon_b). With
/// lambda == 0 the critic is never evaluated.
PolicyGradient composite_gradient(const Experiment& exp, const RunState& run,
                                  const TrainBatch& batch, double lambda, bool include_recon);

/// Applies an ascent direction to the masked policy/embedding parameters.
class PolicyOptimizer {
 public:
  PolicyOptimizer(const Experiment& exp, const RunState& run);
  void ascend(RunState& run, const PolicyGradient& grad);

 private:
  Sgd policy_opt_;
  Sgd embed_opt_;
  std::vector<bool> policy_mask_;
  std::vector<bool> embed_mask_;
};

double policy_update_dpg(const Experiment& exp, RunState& run, PolicyOptimizer& opt,
                         const TrainBatch& batch);

struct CompositeResult {
  double mean_q = 0.0;
  double recon_loss = 0.0;
};
CompositeResult composite_update(const Experiment& exp, RunState& run, PolicyOptimizer& opt,
                                 const TrainBatch& batch, double lambda);

using EvalHook = std::function<void(const RunState&, MetricRow&)>;

/// Algorithm loop with critic. Metric rows are emitted at step 0, every
/// eval_every steps and at the final step.
RunState train_dpg(const Experiment& exp, const EvalHook& on_eval = {});
/// Same loop shape, policy moved by the reconstruction objective only.
RunState train_baseline(const Experiment& exp, const EvalHook& on_eval = {});

/// FNV-1a hash over parameter bits; used to check which networks a step changed.
std::uint64_t params_hash(const ParamList& params);

}  // namespace dpg
