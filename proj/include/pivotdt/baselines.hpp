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

#ifndef PIVOTDT_BASELINES_HPP_
#define PIVOTDT_BASELINES_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "pivotdt/env.hpp"
#include "pivotdt/rng.hpp"

namespace pivotdt {

struct EpisodeResult {
  int steps = 0;
  bool terminated = false;
  PivotSequence pivot_sequence;
  double final_offnorm = 0.0;

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

EpisodeResult episode_result(const JacobiEnv& env);

// Classical max-element Jacobi: always rotate at the largest |a_ij|.
EpisodeResult max_element_solve(const SymMatrix& a, const RewardConfig& cfg);

// Uniformly random pivots; the sanity floor for learned policies.
EpisodeResult random_pivot_solve(const SymMatrix& a, const RewardConfig& cfg, Rng& rng);

// Row-major cyclic sweeps, skipping pivots that are already zero.
EpisodeResult cyclic_solve(const SymMatrix& a, const RewardConfig& cfg);

struct SolverRow {
  int matrix_id = 0;
  std::string solver;
  int steps = 0;
  bool terminated = false;
};

// CSV with header "matrix_id,solver,steps,terminated".
void write_results_csv(std::ostream& out, const std::vector<SolverRow>& rows);
std::vector<SolverRow> read_results_csv(std::istream& in);

}  // namespace pivotdt

#endif  // PIVOTDT_BASELINES_HPP_
