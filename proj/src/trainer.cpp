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

#include "pivotdt/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "pivotdt/parallel.hpp"

namespace pivotdt {

void TrainConfig::validate() const {
  if (total_steps < 1) throw ConfigError("train.total_steps must be at least 1");
  if (eval_every < 1) throw ConfigError("train.eval_every must be at least 1");
  if (eval_every > total_steps) throw ConfigError("train.eval_every must not exceed train.total_steps");
  if (eval_matrices < 1) throw ConfigError("train.eval_matrices must be at least 1");
  if (eval_rollouts < 1) throw ConfigError("train.eval_rollouts must be at least 1");
  if (!(epsilon_train >= 0.0 && epsilon_train <= 1.0)) throw ConfigError("train.epsilon_train must be in [0, 1]");
}

std::string metrics_to_json_line(const MetricsEntry& m) {
  nlohmann::json j;
  j["step"] = m.step;
  j["loss"] = m.loss;
  j["ce"] = m.ce;
  j["mse"] = m.mse;
  if (m.eval_mean_steps) j["eval_mean_steps"] = *m.eval_mean_steps;
  return j.dump();
}

namespace {

std::vector<const DatasetEntry*> train_entries(const MatrixDataset& ds) {
  auto entries = ds.entries(Split::kTrain);
  if (entries.empty()) throw ConfigError("dataset has no train matrices");
  for (const auto* e : entries) {
    if (!ds.pools.contains(e->id)) throw ConfigError("train matrix " + std::to_string(e->id) + " has no sequence pool");
  }
  return entries;
}

}  // namespace

AssembledBatch assemble_batch(const MatrixDataset& ds, const DTConfig& dt, const TrainConfig& cfg,
                              const RewardConfig& reward, int step) {
  const auto entries = train_entries(ds);
  const auto s = static_cast<std::uint64_t>(step);
  Rng pick = make_rng(cfg.seed, {stream::kBatch, s});
  AssembledBatch batch;
  batch.tokens.context_timesteps = dt.context_timesteps;
  batch.matrix_ids.resize(static_cast<std::size_t>(dt.batch_size));
  for (auto& id : batch.matrix_ids) id = entries[static_cast<std::size_t>(uniform_int(pick, static_cast<int>(entries.size())))]->id;
  batch.dropout_seed = derive_seed(cfg.seed, {stream::kBatch, s, 1});

  batch.tokens.episodes.resize(static_cast<std::size_t>(dt.batch_size));
  parallel_for(dt.batch_size, cfg.workers, [&](int slot) {
    const int id = batch.matrix_ids[static_cast<std::size_t>(slot)];
    Rng rng = make_rng(cfg.seed, {stream::kSlot, s, static_cast<std::uint64_t>(slot)});
    const auto& seq = epsilon_greedy_select(ds.pools.at(id), cfg.epsilon_train, rng);
    const Trajectory traj = rollout_with_sequence(ds.by_id(id).matrix, seq.pivots, reward);
    batch.tokens.episodes[static_cast<std::size_t>(slot)] = embed_tokens(traj, dt);
  });
  return batch;
}

TrainResult train(const MatrixDataset& ds, const DTConfig& dt, const TrainConfig& cfg, const RewardConfig& reward,
                  const InferenceConfig& eval_infer, const MetricsCallback& on_metrics) {
  dt.validate();
  cfg.validate();
  reward.validate();
  train_entries(ds);
  const auto test = ds.entries(Split::kTest);
  if (test.empty()) throw ConfigError("dataset has no test matrices");
  for (const auto& e : ds.matrices) {
    if (e.matrix.dim() != dt.n) {
      throw ConfigError("matrix " + std::to_string(e.id) + " is " + std::to_string(e.matrix.dim()) +
                        "x" + std::to_string(e.matrix.dim()) + " but model.n is " + std::to_string(dt.n));
    }
  }

  TrainResult result{DecisionTransformer<float>(dt), {}, {}, {}};
  auto& model = result.model;
  Rng init_rng = make_rng(cfg.seed, {stream::kInit});
  model.init(init_rng);
  Optimizer<float> opt(dt);
  ParamVec<float> grad;

  InferenceConfig probe = eval_infer;
  probe.n_rollouts = cfg.eval_rollouts;

  for (int step = 0; step < cfg.total_steps; ++step) {
    const AssembledBatch batch = assemble_batch(ds, dt, cfg, reward, step);
    result.train_ids_seen.insert(result.train_ids_seen.end(), batch.matrix_ids.begin(), batch.matrix_ids.end());
    const LossBreakdown lb = loss_and_gradient(model, batch.tokens, Mode::kTrain, batch.dropout_seed, &grad, cfg.workers);
    opt.step(model.layout(), model.params(), grad);

    MetricsEntry m{step + 1, lb.loss, lb.ce, lb.mse, std::nullopt};
    if ((step + 1) % cfg.eval_every == 0) {
      // Progress check only: nothing computed here feeds back into training.
      Rng rng = make_rng(cfg.seed, {stream::kEval, static_cast<std::uint64_t>(step)});
      std::vector<const DatasetEntry*> pool = test;
      const int take = std::min<int>(cfg.eval_matrices, static_cast<int>(pool.size()));
      for (int i = 0; i < take; ++i) {
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(i + uniform_int(rng, static_cast<int>(pool.size()) - i))]);
      }
      pool.resize(static_cast<std::size_t>(take));
      probe.seed = derive_seed(cfg.seed, {stream::kEval, static_cast<std::uint64_t>(step), 1});
      for (const auto* e : pool) result.eval_ids_seen.push_back(e->id);
      const EvalReport report = evaluate(model, pool, probe, reward, cfg.workers);
      m.eval_mean_steps = report.summary.mean_dt_steps;
    }
    result.metrics.push_back(m);
    if (on_metrics) on_metrics(m);
  }
  return result;
}

}  // namespace pivotdt
