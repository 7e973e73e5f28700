// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "dpg/concepts.hpp"
#include "dpg/rewards.hpp"
#include "oracles.hpp"

using namespace dpg;
using oracle::randn;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_SUITE("rewards") {

TEST_CASE("recon reward examples") {
  CHECK(recon_reward(Tensor::vector({1, 2}), Tensor::vector({1, 2})) == 0.0);
  CHECK(recon_reward(Tensor::vector({1, 1}), Tensor::vector({0, 0})) == -1.0);
  RngStream rng(1, "recon");
  const Tensor z = randn(rng, {5}), zh = randn(rng, {5});
  CHECK(recon_reward(z, zh) == -recon_objective(z, zh));
}

TEST_CASE("look-forward weight and reward") {
  const auto s = schedule_from_betas({0.75});
  CHECK(s.alpha_bar[0] == 0.25);
  CHECK(look_forward_weight(0, s, kInf) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(look_forward_weight(0, s, 2.0) == 2.0);
  CHECK_THROWS(look_forward_weight(0, s, 0.0));
  CHECK_THROWS(look_forward_weight(0, s, -1.0));

  const auto sched = make_schedule(100, 1e-3, 0.2);
  RngStream rng(2, "lf");
  const Tensor x0 = randn(rng, {3}), z = randn(rng, {3});
  const Tensor xt = forward_diffuse(x0, 60, z, sched);
  CHECK(std::abs(look_forward_reward(x0, xt, z, 60, sched, 10.0)) < 1e-20);
}

TEST_CASE("look-forward reward equals minus the clean-prediction error") {
  const auto s = make_schedule(100, 1e-3, 0.2);
  RngStream rng(3, "lf-identity");
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t t = static_cast<std::size_t>(n) % 100;
    const Tensor x0 = randn(rng, {4}), z = randn(rng, {4}), zh = randn(rng, {4});
    const Tensor xt = forward_diffuse(x0, t, z, s);
    const double r = look_forward_reward(x0, xt, zh, t, s, kInf);
    worst = std::max(worst, oracle::rel_err(r, -mean_squared_diff(predict_x0(xt, zh, t, s), x0)));
    if (look_forward_weight(t, s, kInf) <= 10.0) {
      CHECK(oracle::rel_err(look_forward_reward(x0, xt, zh, t, s, 10.0), r) <= 1e-10);
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("feature similarity reward") {
  const FeatureEncoder enc(2, 64, 32, 1234);
  ReferenceSet single;
  single.samples = {Tensor::vector({1.0, 2.0})};
  CHECK(std::abs(feature_sim_reward(Tensor::vector({1.0, 2.0}), single, enc)) < 1e-14);

  ReferenceSet two;
  two.samples = {Tensor::vector({1.0, 2.0}), Tensor::vector({-2.0, 0.5})};
  const Tensor q = Tensor::vector({0.3, -0.7});
  ReferenceSet a, b;
  a.samples = {two.samples[0]};
  b.samples = {two.samples[1]};
  const double pair = 0.5 * (feature_sim_reward(q, a, enc) + feature_sim_reward(q, b, enc));
  CHECK(feature_sim_reward(q, two, enc) == doctest::Approx(pair).epsilon(1e-14));
  ReferenceSet empty;
  CHECK_THROWS(feature_sim_reward(q, empty, enc));
}

TEST_CASE("orthogonal embeddings score minus one") {
  // With embeddings as rows, orthogonality is checked directly on the reference-embedding route.
  const FeatureEncoder enc(2, 64, 32, 7);
  const Tensor k = enc.embed(Tensor::vector({0.4, -1.0}));
  // Build a unit vector orthogonal to k.
  Tensor o(Shape{1, k.size()});
  o[0] = k[1];
  o[1] = -k[0];
  const double n = std::sqrt(o[0] * o[0] + o[1] * o[1]);
  o[0] /= n;
  o[1] /= n;
  CHECK(feature_sim_reward(Tensor::vector({0.4, -1.0}), o, enc) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("feature similarity ignores positive rescaling before normalization") {
  const FeatureEncoder enc(3, 16, 8, 5);
  RngStream rng(4, "scale");
  const Tensor x = randn(rng, {3});
  const Tensor raw = enc.embed_raw(x.reshaped({1, 3}));
  Tensor scaled = raw;
  for (double& v : scaled.data()) v *= 3.7;
  auto unit = [](Tensor t) {
    const double n = std::sqrt(squared_norm(t));
    for (double& v : t.data()) v /= n;
    return t;
  };
  const Tensor u1 = unit(raw), u2 = unit(scaled);
  for (std::size_t i = 0; i < u1.size(); ++i) CHECK(u1[i] == doctest::Approx(u2[i]).epsilon(1e-15));
  CHECK(enc.embed(x) == enc.embed(x));
  CHECK(std::sqrt(squared_norm(enc.embed(x))) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("feature similarity decodes through the codec") {
  const FeatureEncoder enc(4, 16, 8, 5);
  const auto codec = LatentCodec::linear(4, 11);
  ReferenceSet refs;
  refs.samples = {Tensor::vector({1, 0, -1, 2})};
  const Tensor latent = codec.encode(refs.samples[0]);
  CHECK(std::abs(feature_sim_reward(latent, refs, enc, codec)) < 1e-12);
  CHECK(feature_sim_reward(latent, refs, enc) < -1e-3);
}

TEST_CASE("all rewards are non-positive") {
  const auto s = make_schedule(100, 1e-3, 0.2);
  const FeatureEncoder enc(2, 64, 32, 1234);
  const ReferenceSet refs = gen_mixture2d(0, 3);
  RngStream rng(5, "sign");
  for (int n = 0; n < 300; ++n) {
    const Tensor x0 = randn(rng, {2}), z = randn(rng, {2}), zh = randn(rng, {2}, 3.0);
    const std::size_t t = rng.uniform_int(100);
    CHECK(recon_reward(z, zh) <= 0.0);
    CHECK(look_forward_reward(x0, forward_diffuse(x0, t, z, s), zh, t, s, 10.0) <= 0.0);
    const double f = feature_sim_reward(x0, refs, enc);
    CHECK((f <= 0.0 && f >= -2.0));
  }
}

TEST_CASE("targets") {
  const std::vector<double> one{-0.3};
  CHECK(mc_target(one) == -0.3);
  const std::vector<double> ones{1, 1, 1};
  CHECK(mc_target(ones) == 3.0);
  CHECK_THROWS(mc_target(std::vector<double>{}));
  RngStream rng(6, "mc");
  std::vector<double> r(17);
  for (double& v : r) v = rng.gaussian();
  double fold = 0.0;
  for (double v : r) fold += v;
  CHECK(mc_target(r) == doctest::Approx(fold).epsilon(1e-15));
  std::vector<double> shuffled(r.rbegin(), r.rend());
  std::rotate(shuffled.begin(), shuffled.begin() + 5, shuffled.end());
  CHECK(mc_target(shuffled) == doctest::Approx(mc_target(r)).epsilon(1e-14));

  CHECK(discounted_target(1.0, 1.0, 0.5) == 1.5);
  for (int n = 0; n < 50; ++n) {
    const double im = rng.gaussian(), nq = rng.gaussian();
    CHECK(discounted_target(im, nq, 0.0) == im);
  }
  CHECK_THROWS(discounted_target(1, 1, -0.1));
  CHECK_THROWS(discounted_target(1, 1, 1.1));
  // Three-step chain with gamma 0.5 and a zero terminal value.
  double q = 0.0;
  for (int k = 0; k < 3; ++k) q = discounted_target(1.0, q, 0.5);
  CHECK(q == 1.75);
}

TEST_CASE("reward spec validation") {
  RewardSpec spec;
  spec.validate();
  spec.kind = RewardKind::Composite;
  CHECK_THROWS(spec.validate());
  spec.components = {RewardKind::LookForward, RewardKind::FeatureSim};
  spec.validate();
  spec.lambda = -1;
  CHECK_THROWS(spec.validate());
  spec.lambda = 1;
  spec.lf_weight_clip = 0;
  CHECK_THROWS(spec.validate());
  CHECK(parse_reward_kind("look_forward") == RewardKind::LookForward);
  CHECK(to_string(TargetMode::MonteCarlo) == "monte_carlo");
  CHECK_THROWS(parse_target_mode("td"));
}

TEST_CASE("batched differentiable rewards agree with the scalar forms") {
  const auto s = make_schedule(100, 1e-3, 0.2);
  const FeatureEncoder enc(2, 64, 32, 1234);
  RngStream rng(7, "batched");
  const Tensor z = randn(rng, {6, 2}), zh = randn(rng, {6, 2}), x0 = randn(rng, {6, 2});
  std::vector<std::size_t> t;
  for (int i = 0; i < 6; ++i) t.push_back(rng.uniform_int(100));
  const ReferenceSet refs = gen_mixture2d(1, 2);
  const Tensor ref_emb = enc.embed_rows(stack_rows(refs.samples));
  Tape tape(false);
  const Tensor rr = recon_reward(tape.constant(zh), z).value();
  const Tensor lf = look_forward_reward(tape.constant(zh), z, t, s, 10.0).value();
  const Tensor fs = feature_sim_reward(tape.constant(x0), ref_emb, enc).value();
  for (std::size_t i = 0; i < 6; ++i) {
    const Tensor zi(Shape{2}, std::vector<double>(z.row(i).begin(), z.row(i).end()));
    const Tensor hi(Shape{2}, std::vector<double>(zh.row(i).begin(), zh.row(i).end()));
    const Tensor xi(Shape{2}, std::vector<double>(x0.row(i).begin(), x0.row(i).end()));
    CHECK(rr[i] == doctest::Approx(recon_reward(zi, hi)).epsilon(1e-14));
    const Tensor xt = forward_diffuse(xi, t[i], zi, s);
    CHECK(lf[i] == doctest::Approx(look_forward_reward(xi, xt, hi, t[i], s, 10.0)).epsilon(1e-9));
    CHECK(fs[i] == doctest::Approx(feature_sim_reward(xi, refs, enc)).epsilon(1e-13));
  }
}

TEST_CASE("reward gradients match central differences") {
  const auto s = make_schedule(100, 1e-3, 0.2);
  const FeatureEncoder enc(2, 64, 32, 1234);
  const ReferenceSet refs = gen_mixture2d(1, 2);
  const Tensor ref_emb = enc.embed_rows(stack_rows(refs.samples));
  RngStream fixed(8, "fixed");
  const Tensor z = randn(fixed, {4, 2});
  const std::vector<std::size_t> t{3, 40, 70, 99};
  auto draw = [](RngStream& r) { return std::vector<Tensor>{randn(r, {4, 2}, 2.0)}; };
  oracle::ScalarFn recon = [&](Tape&, const std::vector<Var>& v) { return ad::mean(recon_reward(v[0], z)); };
  oracle::ScalarFn lf = [&](Tape&, const std::vector<Var>& v) {
    return ad::mean(look_forward_reward(v[0], z, t, s, 10.0));
  };
  oracle::ScalarFn feat = [&](Tape&, const std::vector<Var>& v) {
    return ad::mean(feature_sim_reward(v[0], ref_emb, enc));
  };
  CHECK(oracle::worst_fd_error(recon, draw, 100, 31) <= 1e-4);
  CHECK(oracle::worst_fd_error(lf, draw, 100, 32) <= 1e-4);
  CHECK(oracle::worst_fd_error(feat, draw, 100, 33) <= 1e-4);
}

}  // TEST_SUITE
