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

#ifndef PIVOTDT_INFERENCE_HPP_
#define PIVOTDT_INFERENCE_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pivotdt/baselines.hpp"
#include "pivotdt/datagen.hpp"
#include "pivotdt/io.hpp"
#include "pivotdt/model.hpp"

namespace pivotdt {

struct InferenceConfig {
  double target_return = 1.4;
  // Probability of the greedy action once the last reward is at or below the
  // threshold. Note the meaning is opposite to the training epsilon.
  double epsilon_infer = 0.475;
  double reward_threshold = -0.1;
  int n_rollouts = 50;
  int max_steps = 60;
  std::uint64_t seed = 0;

  void validate() const;
};

// Greedy argmax when last_reward > threshold; otherwise argmax with
// probability epsilon_infer and a uniform action with probability 1 - epsilon_infer.
PivotIndex select_action(std::span<const double> pi, double last_reward, const InferenceConfig& cfg, Rng& rng);

// One return-conditioned episode. rg starts at target_return and is reduced by
// each realised reward; the first action is greedy. When rg_trace is given it
// receives the return-to-go fed to the model at every step.
EpisodeResult conditioned_rollout(const DecisionTransformer<float>& model, const SymMatrix& a,
                                  const InferenceConfig& cfg, const RewardConfig& reward, Rng& rng,
                                  std::vector<Return>* rg_trace = nullptr);

struct BestOfRollouts {
  EpisodeResult best;
  bool success = false;  // at least one rollout terminated
  int best_index = 0;
  std::vector<EpisodeResult> all;
};

// n_rollouts rollouts, rollout r using stream (seed, r). Best = fewest steps
// among terminated rollouts, first occurrence on ties.
BestOfRollouts best_of_rollouts(const DecisionTransformer<float>& model, const SymMatrix& a,
                                const InferenceConfig& cfg, const RewardConfig& reward, std::uint64_t seed,
                                int workers = 1);

struct EvalRow {
  int matrix_id = 0;
  int dt_steps = 0;
  bool dt_terminated = false;
  int max_elem_steps = 0;
  bool max_elem_terminated = false;
  int savings = 0;  // max_elem_steps - dt_steps
};

struct EvalSummary {
  int matrices = 0;
  double mean_dt_steps = 0.0;
  double mean_max_elem_steps = 0.0;
  double mean_savings = 0.0;
  double percent_savings = 0.0;  // mean_savings / mean_max_elem_steps * 100
  double dt_termination_rate = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalSummary summary;
  std::vector<EpisodeRecord> dt_episodes;  // best rollout per matrix
  std::vector<EpisodeRecord> all_episodes;  // every rollout
};

EvalSummary summarize(const std::vector<EvalRow>& rows);

// Best-of-rollouts vs max-element on each matrix. Matrix i uses the rollout
// stream (cfg.seed, matrix id). Matrices smaller than the model are padded.
EvalReport evaluate(const DecisionTransformer<float>& model, const std::vector<const DatasetEntry*>& entries,
                    const InferenceConfig& cfg, const RewardConfig& reward, int workers = 1);

struct TransferReport {
  int source_n = 0;
  int target_n = 0;
  EvalReport report;  // max-element steps are measured on the unpadded matrices
};

// Runs a model trained at n on m x m matrices (m <= n) padded to n.
TransferReport transfer_eval(const DecisionTransformer<float>& model, const std::vector<const DatasetEntry*>& entries,
                             const InferenceConfig& cfg, const RewardConfig& reward, int workers = 1);

// CSV: matrix_id,dt_steps,max_elem_steps,savings
void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows);
std::string eval_summary_json(const EvalSummary& s);

}  // namespace pivotdt

#endif  // PIVOTDT_INFERENCE_HPP_
