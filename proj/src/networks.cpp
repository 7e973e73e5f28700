// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/networks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpg {

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

std::vector<Var> bind(Tape& tape, const ParamList& params, bool track) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(track ? tape.leaf(p.value) : tape.constant(p.value));
  return vars;
}

Tensor timestep_embedding(std::span<const std::size_t> t, std::size_t dim) {
  Tensor out(Shape{t.size(), dim});
  const std::size_t half = dim / 2;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double step = static_cast<double>(t[r]);
    for (std::size_t k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
      out.at(r, k) = std::sin(step * freq);
      out.at(r, half + k) = std::cos(step * freq);
    }
  }
  return out;
}

ParamList init_mlp(const MlpShape& shape, const std::string& prefix, RngStream& rng) {
  std::vector<std::size_t> widths{shape.in};
  widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
  widths.push_back(shape.out);
  ParamList params;
  const std::size_t layers = widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    Tensor w(Shape{in, out});
    // Xavier-uniform everywhere except the output layer, which starts at zero.
    if (l + 1 < layers) {
      const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      for (double& v : w.data()) v = rng.uniform(-bound, bound);
    }
    params.push_back({prefix + ".l" + std::to_string(l) + ".w", std::move(w)});
    params.push_back({prefix + ".l" + std::to_string(l) + ".b", Tensor(Shape{out})});
  }
  return params;
}

Var mlp_forward(std::span<const Var> params, Var input) {
  if (params.size() % 2 != 0 || params.empty()) {
    throw std::invalid_argument("mlp_forward: expected weight/bias pairs");
  }
  Var h = input;
  const std::size_t layers = params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_bias(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers) h = ad::tanh(h);
  }
  return h;
}

EmbeddingTable::EmbeddingTable(std::size_t num_concepts, std::size_t num_contexts,
                               std::size_t dim, RngStream& rng)
    : num_concepts_(num_concepts), num_contexts_(num_contexts), dim_(dim) {
  if (num_concepts == 0 || num_contexts == 0 || dim < 2) {
    throw std::invalid_argument("embedding table needs concepts, contexts and dim >= 2");
  }
  const std::size_t concept_dim = dim / 2;
  Tensor concepts(Shape{num_concepts, concept_dim});
  Tensor contexts(Shape{num_contexts, dim - concept_dim});
  for (double& v : concepts.data()) v = rng.gaussian();
  for (double& v : contexts.data()) v = rng.gaussian();
  params_.push_back({"embed.concept", std::move(concepts)});
  params_.push_back({"embed.context", std::move(contexts)});
}

std::size_t EmbeddingTable::token(std::size_t concept_index, std::size_t context) const {
  if (concept_index >= num_concepts_ || context >= num_contexts_) {
    throw std::out_of_range("condition (" + std::to_string(concept_index) + "," +
                            std::to_string(context) + ") outside embedding table");
  }
  return concept_index * num_contexts_ + context;
}

Var EmbeddingTable::forward(std::span<const Var> bound, std::span<const std::size_t> tokens) const {
  std::vector<std::size_t> concept_rows;
  std::vector<std::size_t> context_rows;
  for (auto tok : tokens) {
    if (tok >= num_tokens()) {
      throw std::out_of_range("token " + std::to_string(tok) + " outside embedding table of " +
                              std::to_string(num_tokens()));
    }
    concept_rows.push_back(concept_of(tok));
    context_rows.push_back(context_of(tok));
  }
  return ad::concat({ad::gather_rows(bound[0], std::move(concept_rows)),
                     ad::gather_rows(bound[1], std::move(context_rows))});
}

ConditionEmbedding embed_condition(const EmbeddingTable& table, std::size_t token_id) {
  if (token_id >= table.num_tokens()) {
    throw std::out_of_range("token " + std::to_string(token_id) + " outside embedding table of " +
                            std::to_string(table.num_tokens()));
  }
  Tape tape(false);
  const auto bound = dpg::bind(tape, table.params(), false);
  const std::size_t tok[1] = {token_id};
  Var v = table.forward(bound, tok);
  return {v.value().reshaped(Shape{table.dim()}), token_id};
}

PolicyNet::PolicyNet(PolicyArch arch, RngStream& rng) : arch_(std::move(arch)) {
  MlpShape shape{arch_.data_dim + arch_.temb_dim + arch_.cond_dim, arch_.hidden, arch_.data_dim};
  params_ = init_mlp(shape, "policy", rng);
}

Var PolicyNet::forward(std::span<const Var> bound, Var x, std::span<const std::size_t> t,
                       Var cond) const {
  Tape& tape = *x.tape;
  Var temb = tape.constant(timestep_embedding(t, arch_.temb_dim));
  return mlp_forward(bound, ad::concat({x, temb, cond}));
}

Tensor PolicyNet::predict(const LatentBatch& batch) const {
  Tape tape(false);
  const auto bound = dpg::bind(tape, params_, false);
  return forward(bound, tape.constant(batch.x), batch.t, tape.constant(batch.cond)).value();
}

CriticNet::CriticNet(CriticArch arch, RngStream& rng) : arch_(std::move(arch)) {
  params_ = init_mlp(MlpShape{input_dim(), arch_.hidden, 1}, "critic", rng);
}

std::size_t CriticNet::input_dim() const {
  return arch_.data_dim * (arch_.lookahead_input ? 3 : 2) + arch_.temb_dim + arch_.cond_dim;
}

Var CriticNet::forward(std::span<const Var> bound, Var x, Var action,
                       std::span<const std::size_t> t, Var cond,
                       const DiffusionSchedule* schedule) const {
  Tape& tape = *x.tape;
  require_same_shape(x.value(), action.value(), "critic_forward");
  Var temb = tape.constant(timestep_embedding(t, arch_.temb_dim));
  if (!arch_.lookahead_input) return mlp_forward(bound, ad::concat({x, action, temb, cond}));
  if (!schedule) throw std::invalid_argument("critic: lookahead input needs a schedule");
  std::vector<double> cx(t.size());
  std::vector<double> ca(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double abar = schedule->alpha_bar.at(t[r]);
    const double w = (1.0 - abar) / abar;
    const double k = std::sqrt(std::min(w, arch_.lookahead_clip) / w);
    cx[r] = k / std::sqrt(abar);
    ca[r] = k * std::sqrt(1.0 - abar) / std::sqrt(abar);
  }
  Var x0_hat = ad::sub(ad::scale_rows(x, std::move(cx)), ad::scale_rows(action, std::move(ca)));
  return mlp_forward(bound, ad::concat({x, action, x0_hat, temb, cond}));
}

Tensor CriticNet::predict(const LatentBatch& batch, const Tensor& action,
                          const DiffusionSchedule* schedule) const {
  Tape tape(false);
  const auto bound = dpg::bind(tape, params_, false);
  return forward(bound, tape.constant(batch.x), tape.constant(action), batch.t,
                 tape.constant(batch.cond), schedule)
      .value();
}

LatentBatch as_batch(const LatentState& state) {
  const std::size_t d = state.x.size();
  const std::size_t c = state.cond.vector.size();
  return {state.x.reshaped(Shape{1, d}), {state.t}, state.cond.vector.reshaped(Shape{1, c})};
}

Tensor policy_forward(const PolicyNet& net, const LatentState& state) {
  return net.predict(as_batch(state)).reshaped(state.x.shape());
}

double critic_forward(const CriticNet& net, const LatentState& state, const Tensor& action,
                      const DiffusionSchedule* schedule) {
  const auto batch = as_batch(state);
  return net.predict(batch, action.reshaped(batch.x.shape()), schedule).item();
}

}  // namespace dpg
