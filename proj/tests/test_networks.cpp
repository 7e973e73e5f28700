// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "dpg/checkpoint.hpp"
#include "dpg/config.hpp"
#include "dpg/networks.hpp"
#include "oracles.hpp"

using namespace dpg;
using oracle::randn;

namespace {

void jitter(ParamList& params, RngStream& rng, double scale) {
  for (auto& p : params) {
    for (double& v : p.value.data()) v += scale * rng.gaussian();
  }
}

LatentBatch random_batch(RngStream& rng, std::size_t rows, std::size_t dim, std::size_t cond_dim,
                         std::size_t steps) {
  LatentBatch b{randn(rng, {rows, dim}), {}, randn(rng, {rows, cond_dim})};
  for (std::size_t r = 0; r < rows; ++r) b.t.push_back(rng.uniform_int(steps));
  return b;
}

}  // namespace

TEST_SUITE("networks") {

TEST_CASE("zero-initialized heads") {
  RngStream rng(1, "init");
  PolicyNet policy(PolicyArch{}, rng);
  CriticNet critic(CriticArch{}, rng);
  const auto s = make_schedule(100, 1e-3, 0.2);
  RngStream in(2, "in");
  const LatentBatch b = random_batch(in, 6, 2, 16, 100);
  CHECK(policy.predict(b) == Tensor::zeros({6, 2}));
  CHECK(critic.predict(b, randn(in, {6, 2}), &s) == Tensor::zeros({6, 1}));
}

TEST_CASE("policy output shape follows the latent for 2-D and 64-D") {
  for (std::size_t dim : {2u, 64u}) {
    RngStream rng(3, "shape");
    PolicyArch arch;
    arch.data_dim = dim;
    arch.hidden = {32, 32};
    PolicyNet policy(arch, rng);
    jitter(policy.params(), rng, 0.1);
    LatentState st{randn(rng, {dim}), 7, {randn(rng, {16}), 0}};
    const Tensor out = policy_forward(policy, st);
    CHECK(out.shape() == st.x.shape());
    CHECK(out == policy_forward(policy, st));
  }
}

TEST_CASE("parameter counts are deterministic and the critic stays small") {
  RngStream a(1, "p"), b(2, "p");
  const PolicyNet p1(PolicyArch{}, a), p2(PolicyArch{}, b);
  CHECK(p1.parameter_count() == p2.parameter_count());
  // [x(2) | temb(16) | cond(16)] -> 128 -> 128 -> 128 -> 2
  CHECK(p1.parameter_count() == 34 * 128 + 128 + 2 * (128 * 128 + 128) + 128 * 2 + 2);
  const Experiment exp = build_experiment(default_config());
  RngStream c(1, "c");
  const CriticNet critic(exp.critic_arch, c);
  const PolicyNet policy(exp.policy_arch, c);
  CHECK(static_cast<double>(critic.parameter_count()) <= 0.05 * static_cast<double>(policy.parameter_count()));
}

TEST_CASE("critic action gradient matches central differences") {
  const auto s = make_schedule(100, 1e-3, 0.2);
  for (bool lookahead : {false, true}) {
    CriticArch arch;
    arch.lookahead_input = lookahead;
    arch.hidden = {16};
    RngStream rng(4, "critic-fd");
    CriticNet critic(arch, rng);
    jitter(critic.params(), rng, 0.3);
    const LatentBatch b = random_batch(rng, 3, 2, 16, 100);
    oracle::ScalarFn f = [&](Tape& tape, const std::vector<Var>& v) {
      const auto bound = dpg::bind(tape, critic.params(), false);
      return ad::sum(critic.forward(bound, tape.constant(b.x), v[0], b.t, tape.constant(b.cond), &s));
    };
    auto draw = [](RngStream& r) { return std::vector<Tensor>{randn(r, {3, 2})}; };
    CHECK(oracle::worst_fd_error(f, draw, 100, 21) <= 1e-4);
  }
}

TEST_CASE("policy and critic parameter gradients match central differences") {
  const auto s = make_schedule(50, 1e-3, 0.2);
  RngStream rng(5, "param-fd");
  PolicyNet policy(PolicyArch{2, 4, 4, {6, 5}}, rng);
  CriticNet critic(CriticArch{2, 4, 4, {6}, true, 10.0}, rng);
  jitter(policy.params(), rng, 0.3);
  jitter(critic.params(), rng, 0.3);
  const LatentBatch b = random_batch(rng, 4, 2, 4, 50);

  auto param_values = [](const ParamList& ps) {
    std::vector<Tensor> out;
    for (const auto& p : ps) out.push_back(p.value);
    return out;
  };
  oracle::ScalarFn pf = [&](Tape& tape, const std::vector<Var>& v) {
    return ad::mean(ad::square(policy.forward(v, tape.constant(b.x), b.t, tape.constant(b.cond))));
  };
  oracle::ScalarFn cf = [&](Tape& tape, const std::vector<Var>& v) {
    return ad::mean(critic.forward(v, tape.constant(b.x), tape.constant(b.x), b.t, tape.constant(b.cond), &s));
  };
  const auto pv = param_values(policy.params());
  const auto cv = param_values(critic.params());
  CHECK(oracle::rel_err(oracle::tape_grads(pf, pv), oracle::numeric_grads(pf, pv)) <= 1e-4);
  CHECK(oracle::rel_err(oracle::tape_grads(cf, cv), oracle::numeric_grads(cf, cv)) <= 1e-4);
}

TEST_CASE("end-to-end policy gradient equals the two-pass composition") {
  const auto s = make_schedule(40, 1e-3, 0.2);
  for (bool lookahead : {false, true}) {
    CAPTURE(lookahead);
    RngStream rng(6, "chain");
    PolicyNet policy(PolicyArch{2, 2, 2, {4}}, rng);
    CriticNet critic(CriticArch{2, 2, 2, {4}, lookahead, 10.0}, rng);
    CHECK(policy.parameter_count() <= 50);
    CHECK(critic.parameter_count() <= 50);
    jitter(policy.params(), rng, 0.5);
    jitter(critic.params(), rng, 0.5);
    const LatentBatch b = random_batch(rng, 5, 2, 2, 40);

    Tape tape;
    const auto bp = dpg::bind(tape, policy.params(), true);
    const auto bc = dpg::bind(tape, critic.params(), false);
    Var x = tape.constant(b.x);
    Var a = policy.forward(bp, x, b.t, tape.constant(b.cond));
    tape.backward(ad::mean(critic.forward(bc, x, a, b.t, tape.constant(b.cond), &s)));
    std::vector<Tensor> joint;
    for (const Var& v : bp) joint.push_back(tape.grad(v));

    // Pass 1: dQ/da at a = pi(x).
    const Tensor action = policy.predict(b);
    Tape t1;
    const auto bc1 = dpg::bind(t1, critic.params(), false);
    Var av = t1.leaf(action);
    t1.backward(ad::mean(critic.forward(bc1, t1.constant(b.x), av, b.t, t1.constant(b.cond), &s)));
    const Tensor dq_da = t1.grad(av);
    // Pass 2: vector-Jacobian product of the policy with dQ/da.
    Tape t2;
    const auto bp2 = dpg::bind(t2, policy.params(), true);
    Var a2 = policy.forward(bp2, t2.constant(b.x), b.t, t2.constant(b.cond));
    t2.backward(ad::sum(ad::mul(a2, t2.constant(dq_da))));
    std::vector<Tensor> composed;
    for (const Var& v : bp2) composed.push_back(t2.grad(v));

    CHECK(oracle::rel_err(joint, composed) <= 1e-8);
  }
}

TEST_CASE("forward passes stay finite on large inputs") {
  RngStream rng(7, "big");
  PolicyNet policy(PolicyArch{}, rng);
  CriticNet critic(CriticArch{}, rng);
  jitter(policy.params(), rng, 0.2);
  jitter(critic.params(), rng, 0.2);
  const auto s = make_schedule(100, 1e-3, 0.2);
  LatentBatch b{Tensor::matrix(2, 2, {1e6, -1e6, -1e6, 1e6}), {0, 99}, Tensor(Shape{2, 16}, 1e6)};
  CHECK(policy.predict(b).all_finite());
  CHECK(critic.predict(b, b.x, &s).all_finite());
}

TEST_CASE("condition embeddings") {
  RngStream rng(8, "embed");
  EmbeddingTable table(3, 5, 16, rng);
  CHECK(table.num_tokens() == 15);
  CHECK(table.token(2, 4) == 14);
  CHECK(table.concept_of(14) == 2);
  CHECK(table.context_of(14) == 4);
  CHECK_THROWS_AS(embed_condition(table, 15), std::out_of_range);
  CHECK(embed_condition(table, 4).vector == embed_condition(table, 4).vector);
  for (std::size_t i = 0; i < 15; ++i) {
    for (std::size_t j = i + 1; j < 15; ++j) {
      const Tensor a = embed_condition(table, i).vector, b = embed_condition(table, j).vector;
      CHECK(dot(a.data(), b.data()) / std::sqrt(squared_norm(a) * squared_norm(b)) < 0.99);
    }
  }
}

TEST_CASE("timestep embedding") {
  const std::vector<std::size_t> t{0, 5};
  const Tensor e = timestep_embedding(t, 8);
  CHECK(e.shape() == Shape{2, 8});
  CHECK(e.at(0, 0) == 0.0);   // sin(0)
  CHECK(e.at(0, 4) == 1.0);   // cos(0)
  CHECK(e.at(1, 0) == doctest::Approx(std::sin(5.0)));
}

TEST_CASE("checkpoints reproduce forward outputs bit-exactly") {
  const Experiment exp = build_experiment(default_config());
  RunState run = init_run(exp);
  RngStream rng(9, "ck");
  jitter(run.policy.params(), rng, 0.1);
  jitter(run.critic.params(), rng, 0.1);
  jitter(run.embedding.params(), rng, 0.1);
  run.step = 42;
  const Checkpoint back = parse_checkpoint(checkpoint_text(run, 77));
  CHECK(back.seed == 77);
  CHECK(back.run.step == 42);
  CHECK(params_hash(back.run.policy.params()) == params_hash(run.policy.params()));
  CHECK(params_hash(back.run.critic.params()) == params_hash(run.critic.params()));
  CHECK(params_hash(back.run.embedding.params()) == params_hash(run.embedding.params()));
  const LatentBatch b = random_batch(rng, 8, 2, 16, 100);
  CHECK(back.run.policy.predict(b) == run.policy.predict(b));
  const Tensor a = randn(rng, {8, 2});
  CHECK(back.run.critic.predict(b, a, &exp.schedule) == run.critic.predict(b, a, &exp.schedule));
  CHECK(back.run.critic.arch().lookahead_input == run.critic.arch().lookahead_input);
}

TEST_CASE("malformed checkpoints are rejected") {
  CHECK_THROWS_AS(parse_checkpoint("not json"), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint(R"({"format":"other","version":1})"), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint(R"({"format":"dpgdiff-checkpoint","version":9})"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/step_00000000.json"), CheckpointError);
}

}  // TEST_SUITE
