// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/trainer.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace dpg {

PolicyObjective parse_policy_objective(const std::string& name) {
  if (name == "dpg") return PolicyObjective::Dpg;
  if (name == "composite") return PolicyObjective::Composite;
  throw std::invalid_argument("unknown policy objective '" + name + "'");
}

std::string to_string(PolicyObjective objective) {
  return objective == PolicyObjective::Dpg ? "dpg" : "composite";
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
  if (!(lr_policy > 0.0)) throw std::invalid_argument("lr_policy must be > 0");
  if (!(lr_critic > 0.0)) throw std::invalid_argument("lr_critic must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be > 0");
  if (critic_steps_per_policy_step == 0) {
    throw std::invalid_argument("critic_steps_per_policy_step must be > 0");
  }
  if (!(explore_std >= 0.0)) throw std::invalid_argument("explore_std must be >= 0");
  if (!(action_grad_clip >= 0.0)) throw std::invalid_argument("action_grad_clip must be >= 0");
  reward.validate();
}

void Experiment::prepare() {
  ref_embeddings.clear();
  for (std::size_t slot = 0; slot < concepts.size(); ++slot) {
    ref_embeddings.push_back(encoder.embed_rows(stack_rows(concepts[slot].samples)));
  }
}

Tensor Experiment::reference_embeddings(std::size_t slot) const {
  if (slot < ref_embeddings.size()) return ref_embeddings[slot];
  return encoder.embed_rows(stack_rows(concepts.at(slot).samples));
}

void MetricRow::set(const std::string& name, double value) {
  for (auto& [k, v] : values) {
    if (k == name) {
      v = value;
      return;
    }
  }
  values.emplace_back(name, value);
}

double MetricRow::get(const std::string& name) const {
  for (const auto& [k, v] : values) {
    if (k == name) return v;
  }
  throw std::out_of_range("metric '" + name + "' not recorded at step " + std::to_string(step));
}

RunState init_run(const Experiment& exp) {
  const std::uint64_t seed = exp.train.seed;
  RunState run;
  RngStream prng(seed, "init/policy");
  RngStream crng(seed, "init/critic");
  RngStream erng(seed, "init/embedding");
  run.policy = PolicyNet(exp.policy_arch, prng);
  run.critic = CriticNet(exp.critic_arch, crng);
  run.embedding = EmbeddingTable(exp.concepts.size(), exp.num_contexts, exp.policy_arch.cond_dim, erng);
  return run;
}

void Sgd::step(ParamList& params, const std::vector<Tensor>& grads, const std::vector<bool>& active) {
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value.shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!active[i]) continue;
    Tensor& v = velocity_[i];
    Tensor& p = params[i].value;
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = momentum_ * v[k] + g[k];
      p[k] -= lr_ * v[k];
    }
  }
}

std::vector<bool> resolve_mask(const ParamList& params, const std::string& mask) {
  std::vector<bool> active(params.size(), mask == "all");
  if (mask == "all") return active;
  std::stringstream ss(mask);
  std::string prefix;
  while (std::getline(ss, prefix, ',')) {
    if (prefix.empty()) continue;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].name.rfind(prefix, 0) == 0) active[i] = true;
    }
  }
  return active;
}

Tensor condition_values(const EmbeddingTable& table, std::span<const std::size_t> tokens) {
  Tape tape(false);
  return table.forward(dpg::bind(tape, table.params(), false), tokens).value();
}

TrainBatch draw_batch(const Experiment& exp, const EmbeddingTable& table, RngStream& rng) {
  const std::size_t rows = exp.train.batch_size;
  const std::size_t dim = exp.policy_arch.data_dim;
  TrainBatch b;
  b.x0 = Tensor(Shape{rows, dim});
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t slot = rng.uniform_int(exp.concepts.size());
    const auto& refs = exp.concepts[slot].samples;
    const std::size_t ref = rng.uniform_int(refs.size());
    const std::size_t ctx = rng.uniform_int(exp.num_contexts);
    b.concept_slot.push_back(slot);
    b.reference.push_back(ref);
    b.context.push_back(ctx);
    b.tokens.push_back(table.token(slot, ctx));
    b.t.push_back(rng.uniform_int(exp.schedule.steps()));
    const Tensor x0 = exp.codec.encode(apply_context(refs[ref], ctx, exp.domain));
    std::copy(x0.data().begin(), x0.data().end(), b.x0.row(r).begin());
  }
  b.z = draw_gaussian(rng, b.x0.shape());
  b.x_t = Tensor(b.x0.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double a = std::sqrt(exp.schedule.alpha_bar[b.t[r]]);
    const double s = std::sqrt(1.0 - exp.schedule.alpha_bar[b.t[r]]);
    for (std::size_t c = 0; c < dim; ++c) b.x_t.at(r, c) = a * b.x0.at(r, c) + s * b.z.at(r, c);
  }
  return b;
}

namespace {

Tensor row_tensor(const Tensor& m, std::size_t r) {
  return Tensor(Shape{m.cols()}, std::vector<double>(m.row(r).begin(), m.row(r).end()));
}

double reward_of(const Experiment& exp, RewardKind kind, std::size_t slot, const Tensor& x0,
                 const Tensor& x_i, const Tensor& z_hat, std::size_t i) {
  const RewardSpec& spec = exp.train.reward;
  switch (kind) {
    case RewardKind::Recon: {
      // z recovered from (x0, x_i); identical to the drawn noise up to rounding.
      const double abar = exp.schedule.alpha_bar[i];
      Tensor z(x0.shape());
      for (std::size_t k = 0; k < z.size(); ++k) {
        z[k] = (x_i[k] - std::sqrt(abar) * x0[k]) / std::sqrt(1.0 - abar);
      }
      return recon_reward(z, z_hat);
    }
    case RewardKind::LookForward:
      return look_forward_reward(x0, x_i, z_hat, i, exp.schedule, spec.lf_weight_clip);
    case RewardKind::FeatureSim: {
      const double frac = static_cast<double>(i) / static_cast<double>(exp.schedule.steps());
      if (frac > spec.feature_t_frac) return 0.0;
      return feature_sim_reward(predict_x0(x_i, z_hat, i, exp.schedule),
                                exp.reference_embeddings(slot), exp.encoder, exp.codec);
    }
    case RewardKind::Composite: {
      double total = 0.0;
      for (auto c : spec.components) total += reward_of(exp, c, slot, x0, x_i, z_hat, i);
      return total;
    }
  }
  return 0.0;
}

}  // namespace

std::vector<double> immediate_rewards(const Experiment& exp, const TrainBatch& batch,
                                      const Tensor& action, const Tensor& x_t,
                                      std::span<const std::size_t> t) {
  std::vector<double> out(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    out[r] = reward_of(exp, exp.train.reward.kind, batch.concept_slot[r], row_tensor(batch.x0, r),
                       row_tensor(x_t, r), row_tensor(action, r), t[r]);
  }
  return out;
}

std::vector<double> critic_targets(const Experiment& exp, const RunState& run,
                                   const TrainBatch& batch, const Tensor& action, RngStream& rng) {
  const RewardSpec& spec = exp.train.reward;
  const std::size_t rows = batch.t.size();
  const std::size_t dim = batch.x0.cols();
  std::vector<double> targets = immediate_rewards(exp, batch, action, batch.x_t, batch.t);

  // Earlier trajectory states x_i are forward-noised from the same x0 with
  // fresh noise and scored with the current policy's own action.
  std::vector<std::size_t> owner;
  std::vector<std::size_t> steps;
  if (spec.target_mode == TargetMode::MonteCarlo) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t t = batch.t[r];
      const std::size_t first = t + 1 >= spec.mc_horizon ? t + 1 - spec.mc_horizon : 0;
      for (std::size_t i = first; i < t; ++i) {
        owner.push_back(r);
        steps.push_back(i);
      }
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      if (batch.t[r] == 0) continue;
      owner.push_back(r);
      steps.push_back(batch.t[r] - 1);
    }
  }
  if (owner.empty()) return targets;

  const Tensor noise = draw_gaussian(rng, Shape{owner.size(), dim});
  LatentBatch traj{Tensor(Shape{owner.size(), dim}), steps, Tensor()};
  std::vector<std::size_t> tokens;
  for (std::size_t k = 0; k < owner.size(); ++k) {
    const double abar = exp.schedule.alpha_bar[steps[k]];
    for (std::size_t c = 0; c < dim; ++c) {
      traj.x.at(k, c) = std::sqrt(abar) * batch.x0.at(owner[k], c) + std::sqrt(1.0 - abar) * noise.at(k, c);
    }
    tokens.push_back(batch.tokens[owner[k]]);
  }
  traj.cond = condition_values(run.embedding, tokens);
  const Tensor z_hat = run.policy.predict(traj);

  if (spec.target_mode == TargetMode::MonteCarlo) {
    std::vector<std::vector<double>> per_row(rows);
    for (std::size_t r = 0; r < rows; ++r) per_row[r].push_back(targets[r]);
    for (std::size_t k = 0; k < owner.size(); ++k) {
      const std::size_t r = owner[k];
      per_row[r].push_back(reward_of(exp, spec.kind, batch.concept_slot[r], row_tensor(batch.x0, r),
                                     row_tensor(traj.x, k), row_tensor(z_hat, k), steps[k]));
    }
    for (std::size_t r = 0; r < rows; ++r) targets[r] = mc_target(per_row[r]);
  } else {
    // Bootstrap with the current critic, detached: no gradient reaches phi.
    const Tensor next_q = run.critic.predict(traj, z_hat, &exp.schedule);
    for (std::size_t k = 0; k < owner.size(); ++k) {
      targets[owner[k]] = discounted_target(targets[owner[k]], next_q[k], spec.gamma);
    }
  }
  return targets;
}

CriticStepResult critic_update(CriticNet& critic, Sgd& opt, const Experiment& exp,
                               const LatentBatch& states, const Tensor& actions,
                               std::span<const double> targets) {
  const std::size_t rows = states.t.size();
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < rows; ++r) {
    if (std::isfinite(targets[r])) keep.push_back(r);
  }
  CriticStepResult result;
  result.skipped = rows - keep.size();
  if (keep.empty()) {
    result.loss = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const std::size_t dim = states.x.cols();
  LatentBatch kept{Tensor(Shape{keep.size(), dim}), {}, Tensor(Shape{keep.size(), states.cond.cols()})};
  Tensor act(Shape{keep.size(), dim});
  Tensor tgt(Shape{keep.size(), 1});
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const std::size_t r = keep[k];
    std::copy(states.x.row(r).begin(), states.x.row(r).end(), kept.x.row(k).begin());
    std::copy(states.cond.row(r).begin(), states.cond.row(r).end(), kept.cond.row(k).begin());
    std::copy(actions.row(r).begin(), actions.row(r).end(), act.row(k).begin());
    kept.t.push_back(states.t[r]);
    tgt[k] = targets[r];
  }

  Tape tape;
  const auto bound = dpg::bind(tape, critic.params(), true);
  Var q = critic.forward(bound, tape.constant(kept.x), tape.constant(act), kept.t,
                         tape.constant(kept.cond), &exp.schedule);
  Var loss = ad::mean(ad::square(ad::sub(q, tape.constant(tgt))));
  result.loss = loss.value().item();
  tape.backward(loss);
  std::vector<Tensor> grads;
  for (const Var& v : bound) grads.push_back(tape.grad(v));
  opt.step(critic.params(), grads, std::vector<bool>(grads.size(), true));
  return result;
}

PolicyGradient composite_gradient(const Experiment& exp, const RunState& run,
                                  const TrainBatch& batch, double lambda, bool include_recon) {
  if (lambda == 0.0 && !include_recon) {
    throw std::invalid_argument("policy objective is empty (lambda = 0 without recon)");
  }
  Tape tape;
  const auto bp = dpg::bind(tape, run.policy.params(), true);
  const auto be = dpg::bind(tape, run.embedding.params(), !exp.train.freeze_embeddings);
  Var cond = run.embedding.forward(be, batch.tokens);
  Var x_t = tape.constant(batch.x_t);
  Var z_hat = run.policy.forward(bp, x_t, batch.t, cond);

  PolicyGradient out;
  Var objective{};
  bool have = false;
  if (lambda != 0.0) {
    const auto bc = dpg::bind(tape, run.critic.params(), false);
    const double clip = exp.train.action_grad_clip;
    // Upstream of the action the gradient is (lambda / B) dQ_b/da_b.
    Var action = clip > 0.0 ? ad::clip_grad_rows(z_hat, clip * lambda / static_cast<double>(batch.t.size()))
                            : z_hat;
    Var q = run.critic.forward(bc, x_t, action, batch.t, tape.constant(cond.value()), &exp.schedule);
    Var mean_q = ad::mean(q);
    out.mean_q = mean_q.value().item();
    objective = ad::scale(mean_q, lambda);
    have = true;
  }
  Var recon = ad::mean(recon_reward(z_hat, batch.z));
  out.recon_loss = -recon.value().item();
  if (include_recon) {
    objective = have ? ad::add(objective, recon) : recon;
  }
  tape.backward(objective);
  for (const Var& v : bp) out.policy.push_back(tape.grad(v));
  for (const Var& v : be) out.embedding.push_back(tape.grad(v));
  return out;
}

PolicyOptimizer::PolicyOptimizer(const Experiment& exp, const RunState& run)
    : policy_opt_(exp.train.lr_policy, exp.train.momentum),
      embed_opt_(exp.train.lr_policy, exp.train.momentum) {
  ParamList all = run.policy.params();
  all.insert(all.end(), run.embedding.params().begin(), run.embedding.params().end());
  const auto mask = resolve_mask(all, exp.train.param_mask);
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("param_mask '" + exp.train.param_mask + "' selects no parameters");
  }
  const std::size_t np = run.policy.params().size();
  policy_mask_.assign(mask.begin(), mask.begin() + static_cast<long>(np));
  embed_mask_.assign(mask.begin() + static_cast<long>(np), mask.end());
  if (exp.train.freeze_embeddings) std::fill(embed_mask_.begin(), embed_mask_.end(), false);
}

void PolicyOptimizer::ascend(RunState& run, const PolicyGradient& grad) {
  auto negate = [](std::vector<Tensor> g) {
    for (auto& t : g) {
      for (double& v : t.data()) v = -v;
    }
    return g;
  };
  policy_opt_.step(run.policy.params(), negate(grad.policy), policy_mask_);
  embed_opt_.step(run.embedding.params(), negate(grad.embedding), embed_mask_);
}

double policy_update_dpg(const Experiment& exp, RunState& run, PolicyOptimizer& opt,
                         const TrainBatch& batch) {
  const auto grad = composite_gradient(exp, run, batch, 1.0, false);
  opt.ascend(run, grad);
  return grad.mean_q;
}

CompositeResult composite_update(const Experiment& exp, RunState& run, PolicyOptimizer& opt,
                                 const TrainBatch& batch, double lambda) {
  const auto grad = composite_gradient(exp, run, batch, lambda, true);
  opt.ascend(run, grad);
  return {grad.mean_q, grad.recon_loss};
}

namespace {

struct WindowStats {
  std::map<std::string, std::pair<double, std::size_t>> sums;
  void add(const std::string& name, double v) {
    auto& [s, n] = sums[name];
    s += v;
    ++n;
  }
  void flush(MetricRow& row) {
    for (auto& [name, sn] : sums) row.set(name, sn.second ? sn.first / static_cast<double>(sn.second) : 0.0);
    sums.clear();
  }
};

RunState train_loop(const Experiment& exp, bool with_critic, const EvalHook& on_eval) {
  exp.train.validate();
  if (exp.concepts.empty()) throw std::invalid_argument("training needs at least one concept");
  RunState run = init_run(exp);
  Sgd critic_opt(exp.train.lr_critic, exp.train.momentum);
  PolicyOptimizer policy_opt(exp, run);
  WindowStats window;
  std::size_t bad_streak = 0;

  auto emit = [&](std::size_t step) {
    MetricRow row;
    row.step = step;
    window.flush(row);
    if (on_eval) on_eval(run, row);
    run.metrics.push_back(std::move(row));
  };
  emit(0);

  const TrainConfig& cfg = exp.train;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    RngStream root(cfg.seed, "step/" + std::to_string(step));
    RngStream batch_rng = root.fork("batch");
    const TrainBatch batch = draw_batch(exp, run.embedding, batch_rng);
    double loss = 0.0;
    if (with_critic) {
      const LatentBatch states{batch.x_t, batch.t, condition_values(run.embedding, batch.tokens)};
      Tensor action = run.policy.predict(states);
      RngStream explore = root.fork("explore");
      const Tensor jitter = draw_gaussian(explore, action.shape());
      for (std::size_t i = 0; i < action.size(); ++i) action[i] += cfg.explore_std * jitter[i];
      RngStream traj = root.fork("trajectory");
      const auto targets = critic_targets(exp, run, batch, action, traj);
      double target_mean = 0.0;
      for (double v : targets) target_mean += v;
      window.add("target_mean", target_mean / static_cast<double>(targets.size()));
      for (std::size_t k = 0; k < cfg.critic_steps_per_policy_step; ++k) {
        const auto res = critic_update(run.critic, critic_opt, exp, states, action, targets);
        loss = res.loss;
        window.add("critic_loss", res.loss);
        window.add("skipped_targets", static_cast<double>(res.skipped));
      }
      if (step <= cfg.critic_warmup) {
        if (cfg.policy_objective == PolicyObjective::Composite) {
          const auto res = composite_update(exp, run, policy_opt, batch, 0.0);
          window.add("recon_loss", res.recon_loss);
          loss += res.recon_loss;
        }
      } else if (cfg.policy_objective == PolicyObjective::Dpg) {
        window.add("mean_q", policy_update_dpg(exp, run, policy_opt, batch));
      } else {
        const auto res = composite_update(exp, run, policy_opt, batch, cfg.reward.lambda);
        window.add("mean_q", res.mean_q);
        window.add("recon_loss", res.recon_loss);
        loss += res.recon_loss;
      }
    } else {
      const auto res = composite_update(exp, run, policy_opt, batch, 0.0);
      window.add("recon_loss", res.recon_loss);
      loss = res.recon_loss;
    }
    run.step = step;
    bad_streak = std::isfinite(loss) ? 0 : bad_streak + 1;
    if (bad_streak >= 50) {
      throw TrainingDiverged("non-finite loss for 50 consecutive steps, last at step " +
                             std::to_string(step));
    }
    if (step % cfg.eval_every == 0 || step == cfg.steps) emit(step);
  }
  return run;
}

}  // namespace

RunState train_dpg(const Experiment& exp, const EvalHook& on_eval) {
  return train_loop(exp, true, on_eval);
}

RunState train_baseline(const Experiment& exp, const EvalHook& on_eval) {
  return train_loop(exp, false, on_eval);
}

std::uint64_t params_hash(const ParamList& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    for (double v : p.value.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

}  // namespace dpg
