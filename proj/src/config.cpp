// Copyright 2026 The pivotdt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pivotdt/config.hpp"

#include <set>

#include "json.hpp"
#include "pivotdt/errors.hpp"

namespace pivotdt {

using Json = nlohmann::ordered_json;

void DatasetConfig::validate() const {
  if (n < 2) throw ConfigError("dataset.n must be at least 2");
  if (count < 2) throw ConfigError("dataset.count must be at least 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("dataset.train_fraction must be in (0, 1)");
  if (top_k < 1) throw ConfigError("dataset.top_k must be at least 1");
  dist.validate();
  mcts.validate();
}

void ExperimentConfig::validate() const {
  dataset.validate();
  reward.validate();
  model.validate();
  train.validate();
  infer.validate();
  if (model.n != dataset.n) throw ConfigError("model.n must equal dataset.n");
}

namespace {

// Reads fields from one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const Json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = &root.at(name);
    if (!obj_->is_object()) throw ConfigError("config section '" + name + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!obj_ || !obj_->contains(key)) return;
    used_.insert(key);
    try {
      out = obj_->at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field " + name_ + "." + key + " has the wrong type");
    }
  }

  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    if (!obj_ || !obj_->contains(key)) return;
    get(key, s);
    try {
      out = parse(s);
    } catch (const std::exception& e) {
      throw ConfigError("config field " + name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!used_.contains(k)) throw ConfigError("unknown config field " + name_ + "." + k);
    }
  }

 private:
  std::string name_;
  const Json* obj_ = nullptr;
  std::set<std::string> used_;
};

Json model_json(const DTConfig& m) {
  Json j;
  j["n"] = m.n;
  j["n_blocks"] = m.n_blocks;
  j["n_heads"] = m.n_heads;
  j["context_timesteps"] = m.context_timesteps;
  j["embed_dim"] = m.embed_dim;
  j["dropout"] = m.dropout;
  j["psi"] = m.psi;
  j["learning_rate"] = m.learning_rate;
  j["batch_size"] = m.batch_size;
  j["optimizer"] = to_string(m.optimizer);
  j["weight_decay"] = m.weight_decay;
  j["beta1"] = m.beta1;
  j["beta2"] = m.beta2;
  j["adam_eps"] = m.adam_eps;
  j["grad_clip"] = m.grad_clip;
  j["state_features"] = to_string(m.state_features);
  return j;
}

void read_model(Section& s, DTConfig& m) {
  s.get("n", m.n);
  s.get("n_blocks", m.n_blocks);
  s.get("n_heads", m.n_heads);
  s.get("context_timesteps", m.context_timesteps);
  s.get("embed_dim", m.embed_dim);
  s.get("dropout", m.dropout);
  s.get("psi", m.psi);
  s.get("learning_rate", m.learning_rate);
  s.get("batch_size", m.batch_size);
  s.get_enum("optimizer", m.optimizer, optimizer_from_string);
  s.get("weight_decay", m.weight_decay);
  s.get("beta1", m.beta1);
  s.get("beta2", m.beta2);
  s.get("adam_eps", m.adam_eps);
  s.get("grad_clip", m.grad_clip);
  s.get_enum("state_features", m.state_features, state_features_from_string);
  s.finish();
}

Json parse(const std::string& text) {
  try {
    Json j = Json::parse(text);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  Json j;
  const auto& d = cfg.dataset;
  j["dataset"] = {{"n", d.n},
                  {"count", d.count},
                  {"distribution", to_string(d.dist.kind)},
                  {"low", d.dist.low},
                  {"high", d.dist.high},
                  {"stddev", d.dist.stddev},
                  {"density", d.dist.density},
                  {"train_fraction", d.train_fraction},
                  {"playouts", d.mcts.playouts},
                  {"exploration", d.mcts.exploration},
                  {"rollout", to_string(d.mcts.rollout)},
                  {"greedy_prob", d.mcts.greedy_prob},
                  {"top_k", d.top_k},
                  {"seed", d.seed}};
  const auto& r = cfg.reward;
  j["reward"] = {{"c_step", r.c_step},       {"c_diag", r.c_diag}, {"tau_zero", r.tol.value()},
                 {"max_steps", r.max_steps}, {"scale", r.scale}};
  j["model"] = model_json(cfg.model);
  const auto& t = cfg.train;
  j["train"] = {{"total_steps", t.total_steps},     {"eval_every", t.eval_every},
                {"eval_matrices", t.eval_matrices}, {"eval_rollouts", t.eval_rollouts},
                {"epsilon_train", t.epsilon_train}, {"seed", t.seed}};
  const auto& i = cfg.infer;
  j["infer"] = {{"target_return", i.target_return}, {"epsilon_infer", i.epsilon_infer},
                {"reward_threshold", i.reward_threshold}, {"n_rollouts", i.n_rollouts},
                {"max_steps", i.max_steps},           {"seed", i.seed}};
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  const Json root = parse(text);
  for (const auto& [k, v] : root.items()) {
    if (k != "dataset" && k != "reward" && k != "model" && k != "train" && k != "infer") {
      throw ConfigError("unknown config section '" + k + "'");
    }
  }
  ExperimentConfig cfg;
  {
    Section s(root, "dataset");
    auto& d = cfg.dataset;
    s.get("n", d.n);
    s.get("count", d.count);
    s.get_enum("distribution", d.dist.kind, distribution_kind_from_string);
    s.get("low", d.dist.low);
    s.get("high", d.dist.high);
    s.get("stddev", d.dist.stddev);
    s.get("density", d.dist.density);
    s.get("train_fraction", d.train_fraction);
    s.get("playouts", d.mcts.playouts);
    s.get("exploration", d.mcts.exploration);
    s.get_enum("rollout", d.mcts.rollout, rollout_from_string);
    s.get("greedy_prob", d.mcts.greedy_prob);
    s.get("top_k", d.top_k);
    s.get("seed", d.seed);
    s.finish();
  }
  {
    Section s(root, "reward");
    auto& r = cfg.reward;
    s.get("c_step", r.c_step);
    s.get("c_diag", r.c_diag);
    double tau = r.tol.value();
    s.get("tau_zero", tau);
    try {
      r.tol = ZeroTolerance(tau);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config field reward.tau_zero: ") + e.what());
    }
    s.get("max_steps", r.max_steps);
    s.get("scale", r.scale);
    s.finish();
  }
  {
    Section s(root, "model");
    read_model(s, cfg.model);
  }
  {
    Section s(root, "train");
    auto& t = cfg.train;
    s.get("total_steps", t.total_steps);
    s.get("eval_every", t.eval_every);
    s.get("eval_matrices", t.eval_matrices);
    s.get("eval_rollouts", t.eval_rollouts);
    s.get("epsilon_train", t.epsilon_train);
    s.get("seed", t.seed);
    s.finish();
  }
  {
    Section s(root, "infer");
    auto& i = cfg.infer;
    s.get("target_return", i.target_return);
    s.get("epsilon_infer", i.epsilon_infer);
    s.get("reward_threshold", i.reward_threshold);
    s.get("n_rollouts", i.n_rollouts);
    s.get("max_steps", i.max_steps);
    s.get("seed", i.seed);
    s.finish();
  }
  return cfg;
}

std::string dt_config_to_json(const DTConfig& cfg) { return model_json(cfg).dump(); }

DTConfig dt_config_from_json(const std::string& text) {
  const Json root = Json{{"model", parse(text)}};
  DTConfig cfg;
  Section s(root, "model");
  read_model(s, cfg);
  return cfg;
}

}  // namespace pivotdt
