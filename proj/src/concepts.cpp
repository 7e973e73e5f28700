// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/concepts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dpg/rng.hpp"

namespace dpg {

Domain parse_domain(const std::string& name) {
  if (name == "mixture2d") return Domain::Mixture2d;
  if (name == "glyph") return Domain::Glyph;
  throw std::invalid_argument("unknown domain '" + name + "'");
}

std::string to_string(Domain domain) {
  return domain == Domain::Mixture2d ? "mixture2d" : "glyph";
}

ValueRange value_range(Domain domain) {
  return domain == Domain::Mixture2d ? ValueRange{-20.0, 20.0} : ValueRange{-1.0, 1.0};
}

void ReferenceSet::validate() const {
  if (samples.size() < kMinReferences || samples.size() > kMaxReferences) {
    throw std::invalid_argument("reference set must hold 4-6 samples, got " +
                                std::to_string(samples.size()));
  }
  for (const auto& s : samples) {
    if (s.shape() != samples.front().shape()) {
      throw std::invalid_argument("reference samples disagree in shape");
    }
  }
}

Tensor mixture_anchor(std::uint64_t seed, std::size_t concept_id) {
  RngStream rng(seed, "mixture/rotation");
  const double rotation = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const std::size_t ring = concept_id / 10;
  const std::size_t slot = concept_id % 10;
  const double radius = 2.0 + 1.2 * static_cast<double>(ring);
  const double angle = rotation + 2.0 * std::numbers::pi * static_cast<double>(slot) / 10.0 +
                       0.3 * static_cast<double>(ring);
  return Tensor::vector({radius * std::cos(angle), radius * std::sin(angle)});
}

ReferenceSet gen_mixture2d(std::uint64_t seed, std::size_t concept_id) {
  RngStream rng(seed, "mixture/concept/" + std::to_string(concept_id));
  const Tensor anchor = mixture_anchor(seed, concept_id);
  const std::size_t n = kMinReferences + rng.uniform_int(kMaxReferences - kMinReferences + 1);
  ReferenceSet set;
  set.concept_token = concept_id;
  set.domain = Domain::Mixture2d;
  for (std::size_t i = 0; i < n; ++i) {
    // Uniform in the disk of radius kAnchorJitterRadius.
    const double r = kAnchorJitterRadius * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    set.samples.push_back(
        Tensor::vector({anchor[0] + r * std::cos(phi), anchor[1] + r * std::sin(phi)}));
  }
  return set;
}

namespace {

// Binary stroke mask for a concept: three random segments on the grid.
std::vector<double> glyph_mask(std::uint64_t seed, std::size_t concept_id, std::size_t size) {
  RngStream rng(seed, "glyph/shape/" + std::to_string(concept_id));
  std::vector<double> mask(size * size, 0.0);
  const auto n = static_cast<long>(size);
  const long margin = 1;
  for (int stroke = 0; stroke < 3; ++stroke) {
    const long x0 = margin + static_cast<long>(rng.uniform_int(n - 2 * margin));
    const long y0 = margin + static_cast<long>(rng.uniform_int(n - 2 * margin));
    const long x1 = margin + static_cast<long>(rng.uniform_int(n - 2 * margin));
    const long y1 = margin + static_cast<long>(rng.uniform_int(n - 2 * margin));
    const long steps = std::max({std::labs(x1 - x0), std::labs(y1 - y0), 1L});
    for (long k = 0; k <= steps; ++k) {
      const double f = static_cast<double>(k) / static_cast<double>(steps);
      const long x = std::lround(static_cast<double>(x0) + f * static_cast<double>(x1 - x0));
      const long y = std::lround(static_cast<double>(y0) + f * static_cast<double>(y1 - y0));
      mask[static_cast<std::size_t>(y * n + x)] = 1.0;
    }
  }
  return mask;
}

}  // namespace

ReferenceSet gen_glyph(std::uint64_t seed, std::size_t concept_id, std::size_t size,
                       const GlyphOptions& options) {
  if (size != 8 && size != 16) {
    throw std::invalid_argument("glyph size must be 8 or 16, got " + std::to_string(size));
  }
  const auto mask = glyph_mask(seed, concept_id, size);
  RngStream rng(seed, "glyph/variants/" + std::to_string(concept_id));
  const std::size_t n = kMinReferences + rng.uniform_int(kMaxReferences - kMinReferences + 1);
  ReferenceSet set;
  set.concept_token = concept_id;
  set.domain = Domain::Glyph;
  const long side = static_cast<long>(size);
  for (std::size_t i = 0; i < n; ++i) {
    long dx = 0;
    long dy = 0;
    if (options.jitter_px > 0) {
      const auto span = static_cast<std::uint64_t>(2 * options.jitter_px + 1);
      dx = static_cast<long>(rng.uniform_int(span)) - options.jitter_px;
      dy = static_cast<long>(rng.uniform_int(span)) - options.jitter_px;
    }
    const double intensity =
        options.intensity_jitter > 0.0 ? 1.0 - options.intensity_jitter * rng.uniform() : 1.0;
    Tensor img(Shape{size * size}, -1.0);
    for (long y = 0; y < side; ++y) {
      for (long x = 0; x < side; ++x) {
        const long sx = x - dx;
        const long sy = y - dy;
        if (sx < 0 || sy < 0 || sx >= side || sy >= side) continue;
        img[static_cast<std::size_t>(y * side + x)] =
            -1.0 + 2.0 * intensity * mask[static_cast<std::size_t>(sy * side + sx)];
      }
    }
    set.samples.push_back(std::move(img));
  }
  return set;
}

ReferenceSet generate_concept(Domain domain, std::uint64_t seed, std::size_t concept_id,
                              std::size_t glyph_size) {
  return domain == Domain::Mixture2d ? gen_mixture2d(seed, concept_id)
                                     : gen_glyph(seed, concept_id, glyph_size);
}

std::string context_name(std::size_t context, Domain domain) {
  static const char* mixture[] = {"identity", "shift+x", "shift-x", "shift+y", "shift-y"};
  static const char* glyph[] = {"identity", "roll-right", "roll-left", "brighten", "contrast0.5"};
  if (context >= kNumContexts) throw std::out_of_range("unknown context token " + std::to_string(context));
  return domain == Domain::Mixture2d ? mixture[context] : glyph[context];
}

Tensor apply_context(const Tensor& sample, std::size_t context, Domain domain) {
  if (context >= kNumContexts) {
    throw std::out_of_range("unknown context token " + std::to_string(context));
  }
  if (context == 0) return sample;
  Tensor out = sample;
  if (domain == Domain::Mixture2d) {
    if (sample.size() != 2) throw std::invalid_argument("mixture2d context needs 2-D samples");
    constexpr double kShift = 0.6;
    switch (context) {
      case 1: out[0] += kShift; break;
      case 2: out[0] -= kShift; break;
      case 3: out[1] += kShift; break;
      case 4: out[1] -= kShift; break;
    }
  } else {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(sample.size()))));
    if (side * side != sample.size()) throw std::invalid_argument("glyph context needs a square image");
    auto roll = [&](long dx, long dy) {
      const long n = static_cast<long>(side);
      for (long y = 0; y < n; ++y) {
        for (long x = 0; x < n; ++x) {
          const long sx = ((x - dx) % n + n) % n;
          const long sy = ((y - dy) % n + n) % n;
          out[static_cast<std::size_t>(y * n + x)] = sample[static_cast<std::size_t>(sy * n + sx)];
        }
      }
    };
    switch (context) {
      case 1: roll(1, 0); break;
      case 2: roll(-1, 0); break;
      case 3: for (double& v : out.data()) v += 0.5; break;
      case 4: for (double& v : out.data()) v *= 0.5; break;
    }
  }
  const auto range = value_range(domain);
  for (double& v : out.data()) v = std::clamp(v, range.lo, range.hi);
  return out;
}

void write_dataset(std::ostream& os, const std::vector<ReferenceSet>& sets) {
  char buf[64];
  for (const auto& set : sets) {
    os << "# domain=" << to_string(set.domain) << " shape=" << set.dim()
       << " concept_token=" << set.concept_token << '\n';
    for (const auto& s : set.samples) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", s[i]);
        os << (i ? " " : "") << buf;
      }
      os << '\n';
    }
  }
}

std::vector<ReferenceSet> read_dataset(std::istream& is) {
  std::vector<ReferenceSet> sets;
  std::size_t width = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      ReferenceSet set;
      std::istringstream hs(line.substr(1));
      std::string field;
      bool have_domain = false, have_shape = false, have_token = false;
      while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto key = field.substr(0, eq);
        const auto val = field.substr(eq + 1);
        if (key == "domain") { set.domain = parse_domain(val); have_domain = true; }
        if (key == "shape") { width = std::stoul(val); have_shape = true; }
        if (key == "concept_token") { set.concept_token = std::stoul(val); have_token = true; }
      }
      if (!have_domain || !have_shape || !have_token) {
        throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": incomplete header");
      }
      sets.push_back(std::move(set));
      continue;
    }
    if (sets.empty()) throw std::invalid_argument("dataset: sample row before any header");
    std::istringstream rs(line);
    std::vector<double> values;
    double v;
    while (rs >> v) values.push_back(v);
    if (!rs.eof() || values.size() != width) {
      throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(width) + " values");
    }
    sets.back().samples.push_back(Tensor::from_external(Shape{width}, std::move(values)));
  }
  for (const auto& s : sets) s.validate();
  return sets;
}

}  // namespace dpg
