// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic personalization concepts: small reference sets bound to a concept
// token, plus deterministic "context" transforms that play the role of prompt
// recontextualization.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpg/tensor.hpp"

namespace dpg {

enum class Domain { Mixture2d, Glyph };

Domain parse_domain(const std::string& name);
std::string to_string(Domain domain);

inline constexpr std::size_t kMinReferences = 4;
inline constexpr std::size_t kMaxReferences = 6;
inline constexpr std::size_t kNumContexts = 5;

struct ReferenceSet {
  std::vector<Tensor> samples;
  std::size_t concept_token = 0;
  Domain domain = Domain::Mixture2d;

  std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }
  void validate() const;
};

struct ConditionSpec {
  std::size_t concept_token = 0;
  std::size_t context_token = 0;
};

/// Anchor of a 2-D concept. Anchors sit on concentric rings of ten, so any two
/// concepts are at least 1.2 apart; the seed only rotates the whole layout.
Tensor mixture_anchor(std::uint64_t seed, std::size_t concept_id);
inline constexpr double kAnchorJitterRadius = 0.1;

ReferenceSet gen_mixture2d(std::uint64_t seed, std::size_t concept_id);

struct GlyphOptions {
  int jitter_px = 1;
  double intensity_jitter = 0.25;
};

/// 4-6 variants of one procedural glyph, flattened to size*size, values in [-1,1].
ReferenceSet gen_glyph(std::uint64_t seed, std::size_t concept_id, std::size_t size,
                       const GlyphOptions& options = {});

ReferenceSet generate_concept(Domain domain, std::uint64_t seed, std::size_t concept_id,
                              std::size_t glyph_size = 8);

/// Context tokens. 2-D: identity and four 0.6-unit translations (+x, -x, +y, -y).
/// Glyph: identity, roll right, roll left, intensity +0.5, contrast x0.5.
/// Results are clamped to the domain's value range.
Tensor apply_context(const Tensor& sample, std::size_t context, Domain domain);
std::string context_name(std::size_t context, Domain domain);

struct ValueRange {
  double lo;
  double hi;
};
ValueRange value_range(Domain domain);

/// Text dump: one block per concept, "# domain=<d> shape=<n> concept_token=<k>"
/// followed by one whitespace-separated row per sample.
void write_dataset(std::ostream& os, const std::vector<ReferenceSet>& sets);
std::vector<ReferenceSet> read_dataset(std::istream& is);

}  // namespace dpg
