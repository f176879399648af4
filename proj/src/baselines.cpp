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

#include "pivotdt/baselines.hpp"

#include <cmath>
#include <sstream>

namespace pivotdt {

EpisodeResult episode_result(const JacobiEnv& env) {
  EpisodeResult r;
  r.steps = env.steps();
  r.terminated = env.diagonal();
  r.pivot_sequence.reserve(env.log().size());
  for (const auto& rec : env.log()) r.pivot_sequence.push_back(rec.action);
  r.final_offnorm = std::sqrt(env.state().offnorm_sq());
  return r;
}

EpisodeResult max_element_solve(const SymMatrix& a, const RewardConfig& cfg) {
  JacobiEnv env(a, cfg);
  while (!env.done()) env.step(max_offdiag(env.state()).pivot);
  return episode_result(env);
}

EpisodeResult random_pivot_solve(const SymMatrix& a, const RewardConfig& cfg, Rng& rng) {
  JacobiEnv env(a, cfg);
  const int actions = pivot_count(a.dim());
  while (!env.done()) env.step(PivotIndex{uniform_int(rng, actions)});
  return episode_result(env);
}

EpisodeResult cyclic_solve(const SymMatrix& a, const RewardConfig& cfg) {
  JacobiEnv env(a, cfg);
  const int n = a.dim();
  const int actions = pivot_count(n);
  int k = 0;
  while (!env.done()) {
    // The episode is not diagonal, so some pivot in the sweep is nonzero.
    for (int tries = 0; tries < actions; ++tries, k = (k + 1) % actions) {
      const auto [i, j] = pivot_to_pair(PivotIndex{k}, n);
      if (std::abs(env.state()(i, j)) > cfg.tol.value()) break;
    }
    env.step(PivotIndex{k});
    k = (k + 1) % actions;
  }
  return episode_result(env);
}

void write_results_csv(std::ostream& out, const std::vector<SolverRow>& rows) {
  out << "matrix_id,solver,steps,terminated\n";
  for (const auto& r : rows) {
    out << r.matrix_id << ',' << r.solver << ',' << r.steps << ',' << (r.terminated ? "true" : "false") << '\n';
  }
}

std::vector<SolverRow> read_results_csv(std::istream& in) {
  std::vector<SolverRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != "matrix_id,solver,steps,terminated") {
    throw FormatError("results CSV: missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, solver, steps, term;
    if (!std::getline(ss, id, ',') || !std::getline(ss, solver, ',') || !std::getline(ss, steps, ',') ||
        !std::getline(ss, term, ',')) {
      throw FormatError("results CSV: malformed row '" + line + "'");
    }
    rows.push_back({std::stoi(id), solver, std::stoi(steps), term == "true"});
  }
  return rows;
}

}  // namespace pivotdt
