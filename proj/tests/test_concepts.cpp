// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dpg/concepts.hpp"
#include "dpg/rewards.hpp"

using namespace dpg;

namespace {
double dist(const Tensor& a, const Tensor& b) { return std::sqrt(mean_squared_diff(a, b) * a.size()); }
}  // namespace

TEST_SUITE("concepts") {

TEST_CASE("generation is deterministic in seed and id") {
  for (auto d : {Domain::Mixture2d, Domain::Glyph}) {
    const auto a = generate_concept(d, 3, 4), b = generate_concept(d, 3, 4);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
    const auto c = generate_concept(d, 3, 5);
    CHECK(c.samples.front() != a.samples.front());
  }
}

TEST_CASE("reference sets respect the size and shape invariants") {
  for (auto d : {Domain::Mixture2d, Domain::Glyph}) {
    for (std::size_t k = 0; k < 100; ++k) {
      const auto set = generate_concept(d, 9, k);
      CHECK(set.samples.size() >= kMinReferences);
      CHECK(set.samples.size() <= kMaxReferences);
      CHECK(set.concept_token == k);
      CHECK(set.dim() == (d == Domain::Mixture2d ? 2u : 64u));
      set.validate();
    }
  }
}

TEST_CASE("mixture anchors are well separated and samples stay near them") {
  for (std::uint64_t seed : {0u, 1u, 17u}) {
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t j = i + 1; j < 20; ++j) {
        CHECK(dist(mixture_anchor(seed, i), mixture_anchor(seed, j)) >= 1.0);
      }
      const auto set = gen_mixture2d(seed, i);
      for (const auto& s : set.samples) {
        CHECK(dist(s, mixture_anchor(seed, i)) <= kAnchorJitterRadius + 1e-12);
      }
    }
  }
}

TEST_CASE("glyphs") {
  GlyphOptions still;
  still.jitter_px = 0;
  still.intensity_jitter = 0.0;
  const auto fixed = gen_glyph(2, 6, 8, still);
  for (const auto& s : fixed.samples) CHECK(s == fixed.samples.front());

  for (std::size_t k = 0; k < 30; ++k) {
    const auto set = gen_glyph(5, k, 8);
    for (const auto& s : set.samples) {
      for (double v : s.data()) CHECK((v >= -1.0 && v <= 1.0));
    }
  }
  CHECK_THROWS(gen_glyph(0, 0, 2));
}

TEST_CASE("encoder separates concepts") {
  const FeatureEncoder enc(64, 64, 32, 1234);
  std::vector<std::vector<Tensor>> emb;
  for (std::size_t k = 0; k < 20; ++k) {
    std::vector<Tensor> rows;
    const auto set = gen_glyph(0, k, 8);
    for (const auto& s : set.samples) rows.push_back(enc.embed(s));
    emb.push_back(rows);
  }
  double intra = 0.0, inter = 0.0;
  std::size_t ni = 0, nx = 0;
  for (std::size_t a = 0; a < emb.size(); ++a) {
    for (std::size_t b = 0; b < emb.size(); ++b) {
      for (std::size_t i = 0; i < emb[a].size(); ++i) {
        for (std::size_t j = 0; j < emb[b].size(); ++j) {
          if (a == b && i == j) continue;
          const double c = dot(emb[a][i].data(), emb[b][j].data());
          if (a == b) {
            intra += c;
            ++ni;
          } else {
            inter += c;
            ++nx;
          }
        }
      }
    }
  }
  CHECK(intra / ni > inter / nx);
}

TEST_CASE("contexts") {
  const Tensor p = Tensor::vector({0.2, -0.1});
  CHECK(apply_context(p, 0, Domain::Mixture2d) == p);
  const Tensor right = apply_context(p, 1, Domain::Mixture2d);
  const Tensor back = apply_context(right, 2, Domain::Mixture2d);
  CHECK(back[0] == doctest::Approx(p[0]).epsilon(1e-15));
  CHECK(back[1] == doctest::Approx(p[1]).epsilon(1e-15));
  CHECK(right[0] == doctest::Approx(0.8).epsilon(1e-15));

  const auto glyph = gen_glyph(1, 1, 8).samples.front();
  CHECK(apply_context(glyph, 0, Domain::Glyph) == glyph);
  const auto range = value_range(Domain::Glyph);
  for (std::size_t c = 0; c < kNumContexts; ++c) {
    const Tensor moved = apply_context(glyph, c, Domain::Glyph);
    for (double v : moved.data()) CHECK((v >= range.lo && v <= range.hi));
    CHECK(!context_name(c, Domain::Glyph).empty());
  }
  // Rolling right then left restores the image.
  CHECK(apply_context(apply_context(glyph, 1, Domain::Glyph), 2, Domain::Glyph) == glyph);
  CHECK_THROWS(apply_context(p, kNumContexts, Domain::Mixture2d));
  CHECK_THROWS(context_name(99, Domain::Glyph));
}

TEST_CASE("dataset text round trip") {
  std::vector<ReferenceSet> sets;
  for (std::size_t k = 0; k < 3; ++k) sets.push_back(gen_mixture2d(4, k));
  sets.push_back(gen_glyph(4, 3, 8));
  std::stringstream ss;
  write_dataset(ss, sets);
  const auto back = read_dataset(ss);
  REQUIRE(back.size() == sets.size());
  for (std::size_t k = 0; k < sets.size(); ++k) {
    CHECK(back[k].domain == sets[k].domain);
    CHECK(back[k].concept_token == sets[k].concept_token);
    REQUIRE(back[k].samples.size() == sets[k].samples.size());
    for (std::size_t i = 0; i < sets[k].samples.size(); ++i) CHECK(back[k].samples[i] == sets[k].samples[i]);
  }
  std::stringstream bad("# domain=mixture2d shape=2 concept_token=0\n1.0 nan\n");
  CHECK_THROWS(read_dataset(bad));
  CHECK(parse_domain("glyph") == Domain::Glyph);
  CHECK_THROWS(parse_domain("audio"));
}

}  // TEST_SUITE
