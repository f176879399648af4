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

#ifndef PIVOTDT_DATAGEN_HPP_
#define PIVOTDT_DATAGEN_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pivotdt/env.hpp"
#include "pivotdt/rng.hpp"

namespace pivotdt {

// Distribution of the free entries (diagonal + upper triangle) of sampled
// matrices. Off-diagonal entries are kept with probability `density` and
// set to zero otherwise; density 1 gives dense matrices.
struct MatrixDistribution {
  enum class Kind { kUniform, kGaussian };
  Kind kind = Kind::kUniform;
  double low = -1.0;
  double high = 1.0;
  double stddev = 1.0;
  double density = 1.0;

  void validate() const;
};

std::string to_string(MatrixDistribution::Kind kind);
MatrixDistribution::Kind distribution_kind_from_string(const std::string& s);

SymMatrix sample_symmetric_matrix(int n, Rng& rng, const MatrixDistribution& dist = {});

struct RankedSequence {
  PivotSequence pivots;
  bool terminated = true;
  int rank = 0;  // 0 is best
  Return total_return = 0;

  int length() const { return static_cast<int>(pivots.size()); }
};

// Ranked pivot sequences that diagonalize one matrix.
struct SequencePool {
  int matrix_id = 0;
  std::vector<RankedSequence> sequences;
  int optimal_index = 0;

  const RankedSequence& optimal() const { return sequences.at(static_cast<std::size_t>(optimal_index)); }
  int min_length() const { return optimal().length(); }
};

// Sorts by return (descending), then lexicographic pivots; assigns ranks and
// points optimal_index at the first minimal-length sequence.
void rank_pool(SequencePool& pool);

struct ExhaustiveResult {
  bool found = false;
  int min_length = -1;
  PivotSequence witness;  // lexicographically smallest among minimal sequences
};

// Iterative-deepening search over nonzero pivots. found == false means no
// diagonalizing sequence of length <= min(depth_cap, cfg.max_steps) exists.
ExhaustiveResult exhaustive_min_sequence(const SymMatrix& a, int depth_cap, const RewardConfig& cfg);

struct MctsConfig {
  enum class Rollout { kUniform, kMaxElementMix };

  int playouts = 10000;
  double exploration = std::sqrt(2.0);
  Rollout rollout = Rollout::kUniform;
  // kMaxElementMix: probability of taking the max-element pivot in a rollout step.
  double greedy_prob = 0.5;

  void validate() const;
};

std::string to_string(MctsConfig::Rollout r);
MctsConfig::Rollout rollout_from_string(const std::string& s);

// UCT search over matrix states. Every terminated episode seen in a playout is
// collected; the pool is deduplicated and ranked. Throws SearchError if no
// playout reached diagonal form.
SequencePool mcts_search(const SymMatrix& a, const MctsConfig& mcts, const RewardConfig& cfg, Rng& rng,
                         int matrix_id = 0);

// The k best sequences by rank, always keeping the optimal one.
SequencePool top_k(const SequencePool& pool, int k = 100);

// Optimal sequence with probability 1 - epsilon, otherwise a uniform draw from the pool.
const RankedSequence& epsilon_greedy_select(const SequencePool& pool, double epsilon, Rng& rng);

enum class Split { kTrain, kTest };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetEntry {
  int id = 0;
  SymMatrix matrix;
  Split split = Split::kTrain;
};

struct MatrixDataset {
  std::vector<DatasetEntry> matrices;
  std::map<int, SequencePool> pools;

  std::vector<const DatasetEntry*> entries(Split s) const;
  const DatasetEntry& by_id(int id) const;
};

// Seeded shuffle, then the first round(fraction * N) matrices go to train.
// Ids are the input positions.
MatrixDataset split_dataset(std::vector<SymMatrix> matrices, double fraction, Rng& rng);

// Samples `count` matrices (matrix i from stream (seed, i)) and splits them.
MatrixDataset generate_matrices(int n, int count, const MatrixDistribution& dist, double train_fraction,
                                std::uint64_t seed);

// Runs MCTS for every matrix with an rng stream derived from (seed, matrix id),
// keeps the top_k sequences, and stores the pools in the dataset.
void generate_pools(MatrixDataset& dataset, const MctsConfig& mcts, const RewardConfig& cfg, int top_k_count,
                    std::uint64_t seed, int workers);

}  // namespace pivotdt

#endif  // PIVOTDT_DATAGEN_HPP_
