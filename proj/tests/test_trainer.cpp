// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "dpg/trainer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dpg;

namespace {

LatentBatch states_of(const RunState& run, const TrainBatch& b) {
  return {b.x_t, b.t, condition_values(run.embedding, b.tokens)};
}

// Gives the zero-initialized critic head some weight so Q depends on the action.
void perturb_critic(RunState& run, std::uint64_t seed) {
  RngStream rng(seed, "perturb");
  for (auto& p : run.critic.params()) {
    for (double& v : p.value.data()) v += 0.3 * rng.gaussian();
  }
}

std::uint64_t hash_of(const ParamList& p) { return params_hash(p); }

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config validation") {
  TrainConfig c;
  c.validate();
  c.lr_policy = 0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.momentum = 1.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.action_grad_clip = -1;
  CHECK_THROWS(c.validate());
  CHECK(parse_policy_objective("dpg") == PolicyObjective::Dpg);
  CHECK_THROWS(parse_policy_objective("ppo"));
}

TEST_CASE("critic and policy steps touch disjoint parameters") {
  const auto exp = fixture::small_experiment();
  RunState run = init_run(exp);
  perturb_critic(run, 1);
  RngStream rng(0, "batch");
  const TrainBatch b = draw_batch(exp, run.embedding, rng);
  const auto states = states_of(run, b);
  const Tensor action = run.policy.predict(states);
  RngStream traj(0, "traj");
  const auto targets = critic_targets(exp, run, b, action, traj);

  const auto pol = hash_of(run.policy.params()), emb = hash_of(run.embedding.params());
  const auto cri = hash_of(run.critic.params());
  Sgd copt(0.01, 0.9);
  critic_update(run.critic, copt, exp, states, action, targets);
  CHECK(hash_of(run.policy.params()) == pol);
  CHECK(hash_of(run.embedding.params()) == emb);
  CHECK(hash_of(run.critic.params()) != cri);

  const auto cri2 = hash_of(run.critic.params());
  PolicyOptimizer popt(exp, run);
  policy_update_dpg(exp, run, popt, b);
  CHECK(hash_of(run.critic.params()) == cri2);
  CHECK(hash_of(run.policy.params()) != pol);
  composite_update(exp, run, popt, b, 1.0);
  CHECK(hash_of(run.critic.params()) == cri2);
}

TEST_CASE("constant critic gives a zero policy step") {
  const auto exp = fixture::small_experiment();
  RunState run = init_run(exp);
  for (auto& p : run.critic.params()) {
    if (p.name.find(".b") != std::string::npos) p.value.data()[0] += 0.5;
  }
  RngStream rng(0, "batch");
  const TrainBatch b = draw_batch(exp, run.embedding, rng);
  PolicyOptimizer opt(exp, run);
  const auto before = hash_of(run.policy.params());
  policy_update_dpg(exp, run, opt, b);
  CHECK(hash_of(run.policy.params()) == before);
}

TEST_CASE("param mask restricts the policy step") {
  // The head starts at zero, so the first layer only moves from the second step on.
  const auto exp = fixture::small_experiment({"trainer.param_mask=policy.l0,policy.l2"});
  RunState run = init_run(exp);
  const RunState before = run;
  RngStream rng(0, "batch");
  const TrainBatch b = draw_batch(exp, run.embedding, rng);
  PolicyOptimizer opt(exp, run);
  composite_update(exp, run, opt, b, 0.0);
  composite_update(exp, run, opt, b, 0.0);
  for (std::size_t i = 0; i < run.policy.params().size(); ++i) {
    const auto& p = run.policy.params()[i];
    const bool masked = p.name.rfind("policy.l1", 0) != 0;
    CAPTURE(p.name);
    if (masked) {
      CHECK(p.value != before.policy.params()[i].value);
    } else {
      CHECK(p.value == before.policy.params()[i].value);
    }
  }
  CHECK(hash_of(run.embedding.params()) == hash_of(before.embedding.params()));

  const auto none = fixture::small_experiment({"trainer.param_mask=nothing"});
  const RunState r2 = init_run(none);
  CHECK_THROWS(PolicyOptimizer(none, r2));
  auto mask = resolve_mask(run.policy.params(), "policy.l1.w,policy.l2");
  CHECK(mask == std::vector<bool>{false, false, true, false, true, true});
}

TEST_CASE("zero weight matches the baseline bit for bit") {
  const auto exp = fixture::small_experiment({"reward.lambda=0", "trainer.steps=100"});
  const RunState a = train_dpg(exp);
  const RunState b = train_baseline(exp);
  CHECK(hash_of(a.policy.params()) == hash_of(b.policy.params()));
  CHECK(hash_of(a.embedding.params()) == hash_of(b.embedding.params()));
  CHECK(hash_of(a.policy.params()) != hash_of(init_run(exp).policy.params()));
}

TEST_CASE("combined gradient is linear in the weight") {
  for (const char* clip : {"trainer.action_grad_clip=0", "trainer.action_grad_clip=10"}) {
    const auto exp = fixture::small_experiment({clip});
    RunState run = init_run(exp);
    perturb_critic(run, 2);
    RngStream rng(3, "batch");
    const TrainBatch b = draw_batch(exp, run.embedding, rng);
    const double lambda = 2.5;
    const auto full = composite_gradient(exp, run, b, lambda, true);
    const auto q = composite_gradient(exp, run, b, 1.0, false);
    const auto r = composite_gradient(exp, run, b, 0.0, true);
    std::vector<Tensor> got = full.policy, want;
    got.insert(got.end(), full.embedding.begin(), full.embedding.end());
    auto qs = q.policy, rs = r.policy;
    qs.insert(qs.end(), q.embedding.begin(), q.embedding.end());
    rs.insert(rs.end(), r.embedding.begin(), r.embedding.end());
    for (std::size_t k = 0; k < qs.size(); ++k) {
      Tensor w = qs[k];
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = lambda * qs[k][i] + rs[k][i];
      want.push_back(w);
    }
    CHECK(oracle::rel_err(got, want) <= 1e-8);
  }
  const auto exp = fixture::small_experiment();
  const RunState run = init_run(exp);
  RngStream rng(3, "batch");
  const TrainBatch b = draw_batch(exp, run.embedding, rng);
  CHECK_THROWS(composite_gradient(exp, run, b, 0.0, false));
}

TEST_CASE("critic step examples") {
  const auto exp = fixture::small_experiment();
  RunState run = init_run(exp);
  RngStream rng(4, "batch");
  const TrainBatch b = draw_batch(exp, run.embedding, rng);
  const auto states = states_of(run, b);
  const Tensor action = run.policy.predict(states);
  {
    Sgd opt(0.1, 0.9);
    const auto before = hash_of(run.critic.params());
    const std::vector<double> zeros(b.t.size(), 0.0);
    const auto res = critic_update(run.critic, opt, exp, states, action, zeros);
    CHECK(res.loss == 0.0);
    CHECK(hash_of(run.critic.params()) == before);
  }
  perturb_critic(run, 5);
  {
    LatentBatch one{Tensor(Shape{1, 2}), {b.t[0]}, Tensor(Shape{1, states.cond.cols()})};
    std::copy(states.x.row(0).begin(), states.x.row(0).end(), one.x.row(0).begin());
    std::copy(states.cond.row(0).begin(), states.cond.row(0).end(), one.cond.row(0).begin());
    const Tensor a = Tensor(Shape{1, 2}, {0.3, -0.2});
    const double q = run.critic.predict(one, a, &exp.schedule)[0];
    const std::vector<double> target{-0.7};
    Sgd opt(0.1, 0.0);
    const auto res = critic_update(run.critic, opt, exp, one, a, target);
    CHECK(res.loss == (q + 0.7) * (q + 0.7));
  }
  {
    std::vector<double> targets(b.t.size(), -1.0);
    targets[0] = std::nan("");
    targets[1] = INFINITY;
    Sgd opt(0.1, 0.0);
    const auto res = critic_update(run.critic, opt, exp, states, action, targets);
    CHECK(res.skipped == 2);
    CHECK(std::isfinite(res.loss));
  }
}

TEST_CASE("critic fits a fixed synthetic target") {
  const auto exp = fixture::small_experiment({"data.num_concepts=1"});
  RunState run = init_run(exp);
  Sgd opt(exp.train.lr_critic, exp.train.momentum);
  double first = 0.0, last = 0.0;
  for (std::size_t step = 0; step < 2000; ++step) {
    RngStream rng(6, "fit/" + std::to_string(step));
    const TrainBatch b = draw_batch(exp, run.embedding, rng);
    const auto states = states_of(run, b);
    const Tensor a = draw_gaussian(rng, b.x_t.shape());
    std::vector<double> targets;
    for (std::size_t r = 0; r < b.t.size(); ++r) {
      const double d0 = a.at(r, 0) - 0.5 * b.x_t.at(r, 0), d1 = a.at(r, 1) + 0.2;
      targets.push_back(-(d0 * d0 + d1 * d1));
    }
    const double loss = critic_update(run.critic, opt, exp, states, a, targets).loss;
    if (step < 20) first += loss / 20.0;
    if (step >= 1980) last += loss / 20.0;
  }
  CHECK(last < 0.1 * first);
}

TEST_CASE("mean Q rises under ascent on a frozen critic") {
  const auto exp = fixture::small_experiment({"trainer.momentum=0", "trainer.lr_policy=0.0005"});
  RunState run = init_run(exp);
  perturb_critic(run, 7);
  const auto critic_hash = hash_of(run.critic.params());
  RngStream rng(8, "batch");
  const TrainBatch b = draw_batch(exp, run.embedding, rng);
  PolicyOptimizer opt(exp, run);
  std::vector<double> q;
  for (int k = 0; k < 200; ++k) q.push_back(policy_update_dpg(exp, run, opt, b));
  std::size_t drops = 0;
  for (std::size_t k = 1; k < q.size(); ++k) drops += q[k] < q[k - 1] - 1e-12 ? 1 : 0;
  CHECK(drops <= 2);
  CHECK(q.back() > q.front());
  CHECK(hash_of(run.critic.params()) == critic_hash);
}

TEST_CASE("recon reward with zero discount targets minus the recon objective") {
  const auto exp = fixture::small_experiment({"reward.kind=recon", "reward.gamma=0"});
  RunState run = init_run(exp);
  perturb_critic(run, 9);
  RngStream rng(10, "batch");
  const TrainBatch b = draw_batch(exp, run.embedding, rng);
  const Tensor action = oracle::randn(rng, b.x_t.shape());
  RngStream traj(10, "traj");
  const auto targets = critic_targets(exp, run, b, action, traj);
  for (std::size_t r = 0; r < b.t.size(); ++r) {
    const Tensor z(Shape{2}, std::vector<double>(b.z.row(r).begin(), b.z.row(r).end()));
    const Tensor a(Shape{2}, std::vector<double>(action.row(r).begin(), action.row(r).end()));
    CHECK(targets[r] == doctest::Approx(-recon_objective(z, a)).epsilon(1e-10));
  }
}

TEST_CASE("training runs are deterministic and steps=0 is a no-op") {
  const auto exp = fixture::small_experiment({"trainer.steps=30"});
  const RunState a = train_dpg(exp), b = train_dpg(exp);
  CHECK(hash_of(a.policy.params()) == hash_of(b.policy.params()));
  CHECK(hash_of(a.critic.params()) == hash_of(b.critic.params()));
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].step == b.metrics[i].step);
    CHECK(a.metrics[i].values == b.metrics[i].values);
  }
  for (std::size_t i = 1; i < a.metrics.size(); ++i) CHECK(a.metrics[i].step > a.metrics[i - 1].step);

  const auto zero = fixture::small_experiment({"trainer.steps=0"});
  const RunState z = train_dpg(zero);
  const RunState init = init_run(zero);
  CHECK(z.step == 0);
  CHECK(z.metrics.size() == 1);
  CHECK(hash_of(z.policy.params()) == hash_of(init.policy.params()));
  CHECK(hash_of(z.critic.params()) == hash_of(init.critic.params()));
}

TEST_CASE("frozen embeddings stay put") {
  const auto exp = fixture::small_experiment({"trainer.freeze_embeddings=true"});
  const RunState a = train_dpg(exp);
  CHECK(hash_of(a.embedding.params()) == hash_of(init_run(exp).embedding.params()));
}

TEST_CASE("warm-up keeps the pure objective from moving the policy") {
  const auto exp = fixture::small_experiment({"trainer.policy_objective=dpg", "trainer.critic_warmup=20"});
  const RunState a = train_dpg(exp);
  CHECK(hash_of(a.policy.params()) == hash_of(init_run(exp).policy.params()));
  CHECK(hash_of(a.critic.params()) != hash_of(init_run(exp).critic.params()));
}

TEST_CASE("baseline loss falls well below its starting value") {
  const auto exp = fixture::small_experiment(
      {"data.num_concepts=1", "trainer.steps=3000", "trainer.eval_every=100", "policy.hidden=[64,64]"});
  const RunState run = train_baseline(exp);
  const double first = run.metrics[1].get("recon_loss");
  const double last = run.metrics.back().get("recon_loss");
  CHECK(last < 0.2 * first);
}

}  // TEST_SUITE
