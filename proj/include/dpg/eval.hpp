// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "dpg/concepts.hpp"
#include "dpg/rewards.hpp"
#include "dpg/trainer.hpp"

namespace dpg {

/// Mean cosine similarity over all (generated, reference) pairs of unit encoder
/// embeddings. Inputs are decoded through `codec` first.
double image_alignment(const std::vector<Tensor>& generated, const ReferenceSet& refs,
                       const FeatureEncoder& enc, const LatentCodec& codec = {});

struct ProbeExample {
  Tensor x;
  std::size_t concept_slot = 0;
  std::size_t context = 0;
};

/// Multinomial logistic regression over [standardized x ‖ one-hot concept],
/// predicting the context token. Frozen after fit().
class ContextProbe {
 public:
  ContextProbe(std::size_t data_dim, std::size_t num_concepts, std::size_t num_contexts);

  void fit(const std::vector<ProbeExample>& examples, std::size_t iterations, double lr);
  bool trained() const { return trained_; }
  std::size_t num_contexts() const { return num_contexts_; }

  std::vector<double> logits(const Tensor& x, std::size_t concept_slot) const;
  std::size_t predict(const Tensor& x, std::size_t concept_slot) const;
  double accuracy(const std::vector<ProbeExample>& examples) const;

 private:
  std::vector<double> features(const Tensor& x, std::size_t concept_slot) const;

  std::size_t data_dim_;
  std::size_t num_concepts_;
  std::size_t num_contexts_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  Tensor weights_;  // [features, contexts]
  std::vector<double> bias_;
  bool trained_ = false;
};

/// Ground-truth (transformed reference + jitter, context) pairs for every
/// concept slot and context of an experiment.
std::vector<ProbeExample> probe_dataset(const Experiment& exp, std::uint64_t seed,
                                        std::size_t copies_per_cell);

ContextProbe train_probe(const Experiment& exp, std::uint64_t seed);

/// Fraction of samples whose probe-predicted context equals the requested one.
/// conditions[i].concept_token is the experiment's concept slot.
double condition_alignment(const std::vector<Tensor>& generated,
                           const std::vector<ConditionSpec>& conditions, const ContextProbe& probe);

struct ConceptScores {
  double image_alignment = 0.0;
  double condition_alignment = 0.0;
};

struct EvalReport {
  double image_alignment = 0.0;
  double condition_alignment = 0.0;
  std::map<std::size_t, ConceptScores> per_concept;  // keyed by concept token
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::size_t step = 0;
};

inline constexpr std::size_t kSamplesPerCell = 8;

/// Generates `samples_per_cell` deterministic samples per (concept, context)
/// and scores them. Starting noise depends only on (seed, concept, context, index).
EvalReport make_report(const RunState& run, const Experiment& exp, const ContextProbe& probe,
                       std::uint64_t seed, std::size_t samples_per_cell = kSamplesPerCell);

/// key=value lines, per-concept entries as concept.<token>.<metric>.
void write_report(std::ostream& os, const EvalReport& report);

}  // namespace dpg
