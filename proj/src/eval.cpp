// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "dpg/sampler.hpp"

namespace dpg {

double image_alignment(const std::vector<Tensor>& generated, const ReferenceSet& refs,
                       const FeatureEncoder& enc, const LatentCodec& codec) {
  if (generated.empty() || refs.samples.empty()) {
    throw std::invalid_argument("image_alignment: empty inputs");
  }
  std::vector<Tensor> decoded;
  decoded.reserve(generated.size());
  for (const auto& g : generated) decoded.push_back(codec.decode(g));
  const Tensor gen = enc.embed_rows(stack_rows(decoded));
  const Tensor ref = enc.embed_rows(stack_rows(refs.samples));
  double total = 0.0;
  for (std::size_t i = 0; i < gen.rows(); ++i) {
    for (std::size_t j = 0; j < ref.rows(); ++j) total += dot(gen.row(i), ref.row(j));
  }
  return total / static_cast<double>(gen.rows() * ref.rows());
}

ContextProbe::ContextProbe(std::size_t data_dim, std::size_t num_concepts, std::size_t num_contexts)
    : data_dim_(data_dim), num_concepts_(num_concepts), num_contexts_(num_contexts),
      weights_(Shape{data_dim + num_concepts, num_contexts}), bias_(num_contexts, 0.0) {}

std::vector<double> ContextProbe::features(const Tensor& x, std::size_t concept_slot) const {
  if (x.size() != data_dim_) throw std::invalid_argument("probe: sample dimension mismatch");
  if (concept_slot >= num_concepts_) throw std::out_of_range("probe: concept slot out of range");
  std::vector<double> f(data_dim_ + num_concepts_, 0.0);
  for (std::size_t i = 0; i < data_dim_; ++i) f[i] = (x[i] - mean_[i]) * scale_[i];
  f[data_dim_ + concept_slot] = 1.0;
  return f;
}

std::vector<double> ContextProbe::logits(const Tensor& x, std::size_t concept_slot) const {
  if (!trained_) throw std::logic_error("context probe used before training");
  const auto f = features(x, concept_slot);
  std::vector<double> out = bias_;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == 0.0) continue;
    for (std::size_t k = 0; k < num_contexts_; ++k) out[k] += f[i] * weights_.at(i, k);
  }
  return out;
}

std::size_t ContextProbe::predict(const Tensor& x, std::size_t concept_slot) const {
  const auto l = logits(x, concept_slot);
  return static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
}

double ContextProbe::accuracy(const std::vector<ProbeExample>& examples) const {
  if (examples.empty()) throw std::invalid_argument("probe accuracy: no examples");
  std::size_t hits = 0;
  for (const auto& e : examples) hits += predict(e.x, e.concept_slot) == e.context;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

void ContextProbe::fit(const std::vector<ProbeExample>& examples, std::size_t iterations, double lr) {
  if (examples.empty()) throw std::invalid_argument("probe fit: no examples");
  mean_.assign(data_dim_, 0.0);
  scale_.assign(data_dim_, 1.0);
  const double n = static_cast<double>(examples.size());
  for (const auto& e : examples) {
    for (std::size_t i = 0; i < data_dim_; ++i) mean_[i] += e.x[i] / n;
  }
  for (std::size_t i = 0; i < data_dim_; ++i) {
    double var = 0.0;
    for (const auto& e : examples) var += (e.x[i] - mean_[i]) * (e.x[i] - mean_[i]) / n;
    scale_[i] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  trained_ = true;  // logits() below needs the standardization in place

  // Full-batch gradient descent on the mean cross-entropy.
  const std::size_t nf = data_dim_ + num_concepts_;
  std::vector<std::vector<double>> feats;
  for (const auto& e : examples) feats.push_back(features(e.x, e.concept_slot));
  for (std::size_t it = 0; it < iterations; ++it) {
    Tensor gw(Shape{nf, num_contexts_});
    std::vector<double> gb(num_contexts_, 0.0);
    for (std::size_t s = 0; s < examples.size(); ++s) {
      const auto& f = feats[s];
      std::vector<double> l = bias_;
      for (std::size_t i = 0; i < nf; ++i) {
        for (std::size_t k = 0; k < num_contexts_; ++k) l[k] += f[i] * weights_.at(i, k);
      }
      const double mx = *std::max_element(l.begin(), l.end());
      double z = 0.0;
      for (double& v : l) z += (v = std::exp(v - mx));
      for (std::size_t k = 0; k < num_contexts_; ++k) {
        const double d = l[k] / z - (k == examples[s].context ? 1.0 : 0.0);
        gb[k] += d / n;
        for (std::size_t i = 0; i < nf; ++i) gw.at(i, k) += d * f[i] / n;
      }
    }
    for (std::size_t i = 0; i < gw.size(); ++i) weights_[i] -= lr * gw[i];
    for (std::size_t k = 0; k < num_contexts_; ++k) bias_[k] -= lr * gb[k];
  }
}

std::vector<ProbeExample> probe_dataset(const Experiment& exp, std::uint64_t seed,
                                        std::size_t copies_per_cell) {
  RngStream rng(seed, "probe/data");
  const double jitter = exp.domain == Domain::Mixture2d ? 0.1 : 0.1;
  std::vector<ProbeExample> out;
  for (std::size_t slot = 0; slot < exp.concepts.size(); ++slot) {
    for (const auto& ref : exp.concepts[slot].samples) {
      for (std::size_t ctx = 0; ctx < exp.num_contexts; ++ctx) {
        const Tensor base = apply_context(ref, ctx, exp.domain);
        for (std::size_t c = 0; c < copies_per_cell; ++c) {
          Tensor x = base;
          for (double& v : x.data()) v += jitter * rng.gaussian();
          out.push_back({std::move(x), slot, ctx});
        }
      }
    }
  }
  return out;
}

ContextProbe train_probe(const Experiment& exp, std::uint64_t seed) {
  ContextProbe probe(exp.policy_arch.data_dim, exp.concepts.size(), exp.num_contexts);
  probe.fit(probe_dataset(exp, seed, 8), 400, 1.0);
  return probe;
}

double condition_alignment(const std::vector<Tensor>& generated,
                           const std::vector<ConditionSpec>& conditions, const ContextProbe& probe) {
  if (!probe.trained()) throw std::logic_error("condition_alignment: probe is untrained");
  if (generated.empty() || generated.size() != conditions.size()) {
    throw std::invalid_argument("condition_alignment: need one condition per generated sample");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    hits += probe.predict(generated[i], conditions[i].concept_token) == conditions[i].context_token;
  }
  return static_cast<double>(hits) / static_cast<double>(generated.size());
}

EvalReport make_report(const RunState& run, const Experiment& exp, const ContextProbe& probe,
                       std::uint64_t seed, std::size_t samples_per_cell) {
  const std::size_t dim = exp.policy_arch.data_dim;
  const std::size_t cells = exp.concepts.size() * exp.num_contexts;
  const std::size_t rows = cells * samples_per_cell;

  // One batch for all cells; each cell's starting noise comes from its own stream.
  Tensor start(Shape{rows, dim});
  std::vector<std::size_t> tokens;
  std::vector<ConditionSpec> specs;
  for (std::size_t slot = 0; slot < exp.concepts.size(); ++slot) {
    for (std::size_t ctx = 0; ctx < exp.num_contexts; ++ctx) {
      RngStream cell(seed, "eval/" + std::to_string(slot) + "/" + std::to_string(ctx));
      const Tensor noise = draw_gaussian(cell, Shape{samples_per_cell, dim});
      const std::size_t base = tokens.size();
      std::copy(noise.data().begin(), noise.data().end(), start.row(base).begin());
      for (std::size_t k = 0; k < samples_per_cell; ++k) {
        tokens.push_back(run.embedding.token(slot, ctx));
        specs.push_back({slot, ctx});
      }
    }
  }
  RngStream unused(seed, "eval/ancestral");
  const Tensor cond = condition_values(run.embedding, tokens);
  const Tensor latents = denoise(run.policy, std::move(start), cond, exp.schedule, unused,
                                 SampleMode::Deterministic);

  EvalReport report;
  report.seed = seed;
  report.step = run.step;
  report.n_samples = rows;
  std::size_t row = 0;
  for (std::size_t slot = 0; slot < exp.concepts.size(); ++slot) {
    std::vector<Tensor> generated;
    std::vector<ConditionSpec> conds;
    for (std::size_t k = 0; k < exp.num_contexts * samples_per_cell; ++k, ++row) {
      generated.push_back(exp.codec.decode(
          Tensor(Shape{dim}, std::vector<double>(latents.row(row).begin(), latents.row(row).end()))));
      conds.push_back(specs[row]);
    }
    ConceptScores scores;
    scores.image_alignment = image_alignment(generated, exp.concepts[slot], exp.encoder);
    scores.condition_alignment = condition_alignment(generated, conds, probe);
    report.per_concept[exp.concepts[slot].concept_token] = scores;
  }
  for (const auto& [token, s] : report.per_concept) {
    report.image_alignment += s.image_alignment;
    report.condition_alignment += s.condition_alignment;
  }
  report.image_alignment /= static_cast<double>(report.per_concept.size());
  report.condition_alignment /= static_cast<double>(report.per_concept.size());
  return report;
}

void write_report(std::ostream& os, const EvalReport& report) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "step=" << report.step << '\n';
  os << "seed=" << report.seed << '\n';
  os << "n_samples=" << report.n_samples << '\n';
  os << "image_alignment=" << num(report.image_alignment) << '\n';
  os << "condition_alignment=" << num(report.condition_alignment) << '\n';
  for (const auto& [token, s] : report.per_concept) {
    os << "concept." << token << ".image_alignment=" << num(s.image_alignment) << '\n';
    os << "concept." << token << ".condition_alignment=" << num(s.condition_alignment) << '\n';
  }
}

}  // namespace dpg
