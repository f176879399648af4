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

#ifndef PIVOTDT_CONFIG_HPP_
#define PIVOTDT_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "pivotdt/datagen.hpp"
#include "pivotdt/inference.hpp"
#include "pivotdt/model.hpp"
#include "pivotdt/trainer.hpp"

namespace pivotdt {

struct DatasetConfig {
  int n = 5;
  int count = 1000;
  MatrixDistribution dist;
  double train_fraction = 0.75;
  MctsConfig mcts;
  int top_k = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// One experiment in one file: {"dataset", "reward", "model", "train", "infer"}.
// Missing fields keep their defaults; unknown fields are rejected.
struct ExperimentConfig {
  DatasetConfig dataset;
  RewardConfig reward;
  DTConfig model;
  TrainConfig train;
  InferenceConfig infer;

  void validate() const;
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

// Model section alone, as embedded in checkpoints.
std::string dt_config_to_json(const DTConfig& cfg);
DTConfig dt_config_from_json(const std::string& text);

}  // namespace pivotdt

#endif  // PIVOTDT_CONFIG_HPP_
