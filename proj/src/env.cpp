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

#include "pivotdt/env.hpp"

#include <cmath>
#include "json.hpp"

namespace pivotdt {

void RewardConfig::validate() const {
  if (!(c_step >= 0.0) || !(c_diag >= 0.0)) throw ConfigError("c_step and c_diag must be non-negative");
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
}

double transition_reward(int zeros_before, int zeros_after, bool diagonal, const RewardConfig& cfg) {
  double r = static_cast<double>(zeros_after - zeros_before) - cfg.c_step;
  if (diagonal) r += cfg.c_diag;
  return r;
}

JacobiEnv::JacobiEnv(const SymMatrix& a, const RewardConfig& cfg) : cfg_(cfg), original_(a) {
  cfg_.validate();
  if (a.dim() < 2) throw ValidationError("the rotation game needs n >= 2 (a 1x1 matrix has no off-diagonals)");
  if (cfg_.scale) {
    auto scaled = scale_by_max(a);
    state_ = std::move(scaled.matrix);
    factor_ = scaled.factor;
  } else {
    state_ = a;
  }
  zeros_ = count_offdiag_zeros(state_, cfg_.tol);
  diagonal_ = zeros_ == pivot_count(state_.dim());
  done_ = diagonal_;
}

StepResult JacobiEnv::step(PivotIndex action) {
  if (done_) throw StateError("step() called on a finished episode");
  const int n = state_.dim();
  if (action.value < 0 || action.value >= pivot_count(n)) {
    throw ValidationError("pivot index " + std::to_string(action.value) + " invalid for n=" + std::to_string(n));
  }
  TransitionRecord rec{state_, action, 0.0, false, false};
  jacobi_rotate_inplace(state_, action);
  const int zeros_after = count_offdiag_zeros(state_, cfg_.tol);
  diagonal_ = zeros_after == pivot_count(n);
  rec.reward = transition_reward(zeros_, zeros_after, diagonal_, cfg_);
  zeros_ = zeros_after;
  done_ = diagonal_ || static_cast<int>(log_.size()) + 1 >= cfg_.max_steps;
  rec.done = done_;
  rec.diagonal = diagonal_;
  log_.push_back(std::move(rec));
  return {state_, log_.back().reward, done_};
}

PivotSequence Trajectory::pivots() const {
  PivotSequence out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.action);
  return out;
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.reward);
  return out;
}

std::vector<Return> compute_r2g(std::span<const double> rewards) {
  if (rewards.empty()) throw ValidationError("compute_r2g needs at least one reward");
  std::vector<Return> r2g(rewards.size());
  Return acc = 0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc += static_cast<Return>(rewards[t]);
    r2g[t] = acc;
  }
  return r2g;
}

Trajectory rollout_with_sequence(const SymMatrix& a, const PivotSequence& seq, const RewardConfig& cfg) {
  const int n = a.dim();
  for (PivotIndex k : seq) {
    if (k.value < 0 || k.value >= pivot_count(n)) {
      throw ValidationError("pivot index " + std::to_string(k.value) + " invalid for n=" + std::to_string(n));
    }
  }
  JacobiEnv env(a, cfg);
  for (PivotIndex k : seq) {
    if (env.done()) break;
    env.step(k);
  }
  Trajectory traj;
  traj.terminated = env.diagonal();
  traj.final_state = env.state();
  if (env.log().empty()) return traj;

  std::vector<double> rewards;
  rewards.reserve(env.log().size());
  for (const auto& rec : env.log()) rewards.push_back(rec.reward);
  const auto r2g = compute_r2g(rewards);
  traj.steps.reserve(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    traj.steps.push_back({env.log()[t].state, env.log()[t].action, rewards[t], r2g[t]});
  }
  traj.total_return = r2g.front();
  return traj;
}

std::string trajectory_to_jsonl(int matrix_id, const Trajectory& traj, bool scaled) {
  nlohmann::json j;
  j["matrix_id"] = matrix_id;
  j["scaled"] = scaled;
  std::vector<int> pivots;
  std::vector<double> rewards, r2g;
  for (const auto& s : traj.steps) {
    pivots.push_back(s.action.value);
    rewards.push_back(s.reward);
    r2g.push_back(static_cast<double>(s.r2g));
  }
  j["pivots"] = pivots;
  j["rewards"] = rewards;
  j["r2g"] = r2g;
  j["terminated"] = traj.terminated;
  return j.dump();
}

}  // namespace pivotdt
