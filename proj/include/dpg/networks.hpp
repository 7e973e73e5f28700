// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpg/autodiff.hpp"
#include "dpg/diffusion.hpp"
#include "dpg/rng.hpp"
#include "dpg/tensor.hpp"

namespace dpg {

struct Param {
  std::string name;
  Tensor value;
};
using ParamList = std::vector<Param>;

std::size_t count_parameters(const ParamList& params);

/// Registers parameters on a tape: differentiable leaves when `track`,
/// constants otherwise. Result is parallel to `params`.
std::vector<Var> bind(Tape& tape, const ParamList& params, bool track);

/// Sinusoidal embedding of integer timesteps, one row per entry: [len(t), dim].
Tensor timestep_embedding(std::span<const std::size_t> t, std::size_t dim);

/// Fully connected tanh network. Parameters are stored as alternating
/// weight [in,out] and bias [out] entries named "<prefix>.l<i>.w" / ".b".
struct MlpShape {
  std::size_t in = 0;
  std::vector<std::size_t> hidden;
  std::size_t out = 0;
};

ParamList init_mlp(const MlpShape& shape, const std::string& prefix, RngStream& rng);
Var mlp_forward(std::span<const Var> params, Var input);

/// Learned stand-in for a text encoder: a condition token is the pair
/// (concept, context) and its embedding is concept-row ‖ context-row.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t num_concepts, std::size_t num_contexts, std::size_t dim,
                 RngStream& rng);

  std::size_t num_concepts() const { return num_concepts_; }
  std::size_t num_contexts() const { return num_contexts_; }
  std::size_t num_tokens() const { return num_concepts_ * num_contexts_; }
  std::size_t dim() const { return dim_; }

  std::size_t token(std::size_t concept_index, std::size_t context) const;
  std::size_t concept_of(std::size_t token) const { return token / num_contexts_; }
  std::size_t context_of(std::size_t token) const { return token % num_contexts_; }

  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

  /// [len(tokens), dim] condition matrix built from bound table parameters.
  Var forward(std::span<const Var> bound, std::span<const std::size_t> tokens) const;

 private:
  std::size_t num_concepts_ = 0;
  std::size_t num_contexts_ = 0;
  std::size_t dim_ = 0;
  ParamList params_;  // [concepts, dim/2], [contexts, dim - dim/2]
};

struct ConditionEmbedding {
  Tensor vector;
  std::size_t token_id = 0;
};

ConditionEmbedding embed_condition(const EmbeddingTable& table, std::size_t token_id);

/// Batched denoiser input: x_t rows, their timesteps and condition rows.
struct LatentBatch {
  Tensor x;                          // [B, data_dim]
  std::vector<std::size_t> t;        // B entries
  Tensor cond;                       // [B, cond_dim]
};

struct PolicyArch {
  std::size_t data_dim = 2;
  std::size_t temb_dim = 16;
  std::size_t cond_dim = 16;
  std::vector<std::size_t> hidden{128, 128, 128};
};

/// Noise-prediction network: input x_t ‖ temb(t) ‖ cond, output shaped like x_t.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(PolicyArch arch, RngStream& rng);

  const PolicyArch& arch() const { return arch_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  std::size_t parameter_count() const { return count_parameters(params_); }

  Var forward(std::span<const Var> bound, Var x, std::span<const std::size_t> t, Var cond) const;
  /// Untracked forward on plain tensors.
  Tensor predict(const LatentBatch& batch) const;

 private:
  PolicyArch arch_;
  ParamList params_;
};

struct CriticArch {
  std::size_t data_dim = 2;
  std::size_t temb_dim = 16;
  std::size_t cond_dim = 16;
  std::vector<std::size_t> hidden{32};
  /// Also feed the one-shot clean prediction implied by the action, scaled by
  /// sqrt(min(w_t, lookahead_clip) / w_t) with w_t = (1 - abar_t) / abar_t so
  /// it stays bounded where abar_t -> 0.
  bool lookahead_input = false;
  double lookahead_clip = 10.0;
};

/// Scalar value estimate Q(x_t, a, t, cond); one output row per batch row.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(CriticArch arch, RngStream& rng);

  const CriticArch& arch() const { return arch_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  std::size_t parameter_count() const { return count_parameters(params_); }
  std::size_t input_dim() const;

  /// Returns [B,1]. `schedule` is required when lookahead_input is set.
  Var forward(std::span<const Var> bound, Var x, Var action, std::span<const std::size_t> t,
              Var cond, const DiffusionSchedule* schedule) const;
  Tensor predict(const LatentBatch& batch, const Tensor& action,
                 const DiffusionSchedule* schedule) const;

 private:
  CriticArch arch_;
  ParamList params_;
};

/// Single noised sample with its condition.
struct LatentState {
  Tensor x;
  std::size_t t = 0;
  ConditionEmbedding cond;
};

LatentBatch as_batch(const LatentState& state);

/// z_hat = eps_theta(x_t, t, cond), shaped like state.x.
Tensor policy_forward(const PolicyNet& net, const LatentState& state);
double critic_forward(const CriticNet& net, const LatentState& state, const Tensor& action,
                      const DiffusionSchedule* schedule = nullptr);

}  // namespace dpg
