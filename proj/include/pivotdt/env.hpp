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

#ifndef PIVOTDT_ENV_HPP_
#define PIVOTDT_ENV_HPP_

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pivotdt/matrix.hpp"

namespace pivotdt {

// Returns-to-go are accumulated in extended precision. With the default
// reward constants every suffix sum of an episode is then exactly
// representable, so r2g[t] - r2g[t+1] reproduces reward[t] bit for bit.
using Return = long double;
static_assert(std::numeric_limits<Return>::digits >= 64, "extended-precision long double required");

struct RewardConfig {
  double c_step = 0.1;  // magnitude, subtracted every step
  double c_diag = 1.0;  // added on the step that reaches diagonal form
  ZeroTolerance tol;
  int max_steps = 60;
  bool scale = true;  // run episodes on scale_by_max(A)

  void validate() const;
};

// Reward: N_after - N_before - c_step (+ c_diag when the matrix became diagonal).
double transition_reward(int zeros_before, int zeros_after, bool diagonal, const RewardConfig& cfg);

struct TransitionRecord {
  SymMatrix state;  // before the action
  PivotIndex action;
  double reward = 0.0;
  bool done = false;
  bool diagonal = false;  // next state is diagonal (c_diag was granted)
};

struct StepResult {
  const SymMatrix& next_state;
  double reward;
  bool done;
};

// One episode of the Jacobi rotation game. Single owner; not thread-safe.
class JacobiEnv {
 public:
  JacobiEnv(const SymMatrix& a, const RewardConfig& cfg);

  StepResult step(PivotIndex action);

  const SymMatrix& state() const { return state_; }
  const SymMatrix& original() const { return original_; }
  double scale_factor() const { return factor_; }
  int dim() const { return state_.dim(); }
  int steps() const { return static_cast<int>(log_.size()); }
  bool done() const { return done_; }
  bool diagonal() const { return diagonal_; }
  const std::vector<TransitionRecord>& log() const { return log_; }
  const RewardConfig& config() const { return cfg_; }

 private:
  RewardConfig cfg_;
  SymMatrix original_;
  SymMatrix state_;
  double factor_ = 1.0;
  int zeros_ = 0;
  bool diagonal_ = false;
  bool done_ = false;
  std::vector<TransitionRecord> log_;
};

struct TrajectoryStep {
  SymMatrix state;
  PivotIndex action;
  double reward = 0.0;
  Return r2g = 0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Return total_return = 0;
  bool terminated = false;  // reached diagonal form
  SymMatrix final_state;

  int length() const { return static_cast<int>(steps.size()); }
  PivotSequence pivots() const;
  std::vector<double> rewards() const;
};

// Undiscounted suffix sums.
std::vector<Return> compute_r2g(std::span<const double> rewards);

// Replays seq until it is exhausted, the matrix is diagonal or max_steps is hit.
Trajectory rollout_with_sequence(const SymMatrix& a, const PivotSequence& seq, const RewardConfig& cfg);

// One JSON Lines record:
// {"matrix_id", "scaled", "pivots", "rewards", "r2g", "terminated"}.
std::string trajectory_to_jsonl(int matrix_id, const Trajectory& traj, bool scaled);

}  // namespace pivotdt

#endif  // PIVOTDT_ENV_HPP_
