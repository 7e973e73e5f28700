// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dpg {

using Json = nlohmann::ordered_json;

namespace {

Json params_json(const ParamList& params) {
  Json out = Json::array();
  for (const auto& p : params) {
    Json entry;
    entry["name"] = p.name;
    entry["shape"] = p.value.shape();
    entry["data"] = p.value.storage();
    out.push_back(std::move(entry));
  }
  return out;
}

// Overwrites freshly constructed parameters; names and shapes must agree.
void restore_params(ParamList& params, const Json& stored, const std::string& what) {
  if (!stored.is_array() || stored.size() != params.size()) {
    throw CheckpointError(what + ": parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Json& e = stored[i];
    if (e.at("name").get<std::string>() != params[i].name) {
      throw CheckpointError(what + ": expected parameter " + params[i].name);
    }
    const auto shape = e.at("shape").get<Shape>();
    if (shape != params[i].value.shape()) {
      throw CheckpointError(what + ": shape mismatch for " + params[i].name);
    }
    params[i].value = Tensor(shape, e.at("data").get<std::vector<double>>());
  }
}

}  // namespace

std::string checkpoint_text(const RunState& run, std::uint64_t seed) {
  Json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["step"] = run.step;
  // Every trainer stream is keyed by (seed, step label), so this pair is the RNG state.
  j["rng"] = {{"seed", seed}, {"next_step", run.step}};
  const PolicyArch& pa = run.policy.arch();
  j["policy_arch"] = {{"data_dim", pa.data_dim}, {"temb_dim", pa.temb_dim},
                      {"cond_dim", pa.cond_dim}, {"hidden", pa.hidden}};
  const CriticArch& ca = run.critic.arch();
  j["critic_arch"] = {{"data_dim", ca.data_dim}, {"temb_dim", ca.temb_dim},
                      {"cond_dim", ca.cond_dim}, {"hidden", ca.hidden},
                      {"lookahead_input", ca.lookahead_input}, {"lookahead_clip", ca.lookahead_clip}};
  j["embedding"] = {{"num_concepts", run.embedding.num_concepts()},
                    {"num_contexts", run.embedding.num_contexts()},
                    {"dim", run.embedding.dim()}};
  j["params"] = {{"policy", params_json(run.policy.params())},
                 {"critic", params_json(run.critic.params())},
                 {"embedding", params_json(run.embedding.params())}};
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw CheckpointError("not a dpgdiff checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + j.at("version").dump());
    }
    PolicyArch pa;
    const Json& pj = j.at("policy_arch");
    pa.data_dim = pj.at("data_dim").get<std::size_t>();
    pa.temb_dim = pj.at("temb_dim").get<std::size_t>();
    pa.cond_dim = pj.at("cond_dim").get<std::size_t>();
    pa.hidden = pj.at("hidden").get<std::vector<std::size_t>>();
    CriticArch ca;
    const Json& cj = j.at("critic_arch");
    ca.data_dim = cj.at("data_dim").get<std::size_t>();
    ca.temb_dim = cj.at("temb_dim").get<std::size_t>();
    ca.cond_dim = cj.at("cond_dim").get<std::size_t>();
    ca.hidden = cj.at("hidden").get<std::vector<std::size_t>>();
    ca.lookahead_input = cj.at("lookahead_input").get<bool>();
    ca.lookahead_clip = cj.at("lookahead_clip").get<double>();
    const Json& ej = j.at("embedding");

    RngStream scratch(0, "checkpoint/shape");
    Checkpoint ck;
    ck.run.policy = PolicyNet(pa, scratch);
    ck.run.critic = CriticNet(ca, scratch);
    ck.run.embedding = EmbeddingTable(ej.at("num_concepts").get<std::size_t>(),
                                      ej.at("num_contexts").get<std::size_t>(),
                                      ej.at("dim").get<std::size_t>(), scratch);
    restore_params(ck.run.policy.params(), j.at("params").at("policy"), "policy");
    restore_params(ck.run.critic.params(), j.at("params").at("critic"), "critic");
    restore_params(ck.run.embedding.params(), j.at("params").at("embedding"), "embedding");
    ck.run.step = j.at("step").get<std::size_t>();
    ck.seed = j.at("rng").at("seed").get<std::uint64_t>();
    return ck;
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const RunState& run, std::uint64_t seed) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << checkpoint_text(run, seed);
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("checkpoint not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace dpg
