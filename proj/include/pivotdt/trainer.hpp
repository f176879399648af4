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

#ifndef PIVOTDT_TRAINER_HPP_
#define PIVOTDT_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pivotdt/datagen.hpp"
#include "pivotdt/inference.hpp"
#include "pivotdt/model.hpp"

namespace pivotdt {

struct TrainConfig {
  int total_steps = 10000;
  int eval_every = 20;
  int eval_matrices = 10;
  int eval_rollouts = 1;  // rollouts per matrix for the periodic progress check
  double epsilon_train = 0.7;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

struct MetricsEntry {
  int step = 0;
  double loss = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  std::optional<double> eval_mean_steps;
};

// {"step", "loss", "ce", "mse", "eval_mean_steps"?}
std::string metrics_to_json_line(const MetricsEntry& m);

struct AssembledBatch {
  TokenBatch tokens;
  std::vector<int> matrix_ids;
  std::uint64_t dropout_seed = 0;
};

// Batch for one gradient step: batch_size train matrices drawn uniformly,
// each with an epsilon-greedy pivot sequence rolled out on the fly. Fully
// determined by (cfg.seed, step).
AssembledBatch assemble_batch(const MatrixDataset& ds, const DTConfig& dt, const TrainConfig& cfg,
                              const RewardConfig& reward, int step);

struct TrainResult {
  DecisionTransformer<float> model;
  std::vector<MetricsEntry> metrics;
  std::vector<int> train_ids_seen;
  std::vector<int> eval_ids_seen;
};

using MetricsCallback = std::function<void(const MetricsEntry&)>;

TrainResult train(const MatrixDataset& ds, const DTConfig& dt, const TrainConfig& cfg, const RewardConfig& reward,
                  const InferenceConfig& eval_infer, const MetricsCallback& on_metrics = {});

}  // namespace pivotdt

#endif  // PIVOTDT_TRAINER_HPP_
