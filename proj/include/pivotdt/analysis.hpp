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

#ifndef PIVOTDT_ANALYSIS_HPP_
#define PIVOTDT_ANALYSIS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "pivotdt/baselines.hpp"
#include "pivotdt/io.hpp"

namespace pivotdt {

struct SolverStats {
  std::string solver;
  int matrices = 0;
  double mean_steps = 0.0;
  double median_steps = 0.0;
  int min_steps = 0;
  int max_steps = 0;
  double termination_rate = 0.0;
};

// How many fewer steps `solver` needs than `reference`, on average.
struct PairSavings {
  std::string solver;
  std::string reference;
  double mean_savings = 0.0;
  double percent_savings = 0.0;  // relative to the reference mean
};

struct Comparison {
  std::vector<SolverStats> solvers;  // sorted by name
  std::vector<PairSavings> savings;  // every ordered pair of distinct solvers
};

// Every solver must cover the same matrix ids exactly once.
Comparison compare_solvers(const std::vector<SolverRow>& rows);

struct Heatmap {
  int step = 0;  // 1-based
  int episodes = 0;  // episodes that reached this step
  std::vector<std::vector<double>> matrix;  // n x n, symmetric, zero diagonal

  bool empty() const { return episodes == 0; }
};

std::vector<Heatmap> pivot_heatmaps(const std::vector<EpisodeResult>& episodes, int n, int steps);

struct TransitionEdge {
  int step = 0;  // step of the `to` pivot, 1-based
  int from = -1;  // -1 is the start node
  int to = 0;
  double p = 0.0;
};

struct TransitionGraph {
  std::vector<std::vector<int>> layers;  // distinct pivots per step, ascending
  std::vector<TransitionEdge> edges;
  double coverage = 0.0;
  std::vector<std::pair<PivotSequence, int>> sequences;  // the top_n sequences with counts
};

TransitionGraph transition_graph(const std::vector<EpisodeResult>& episodes, int top_n);

void write_comparison_csv(std::ostream& out, const Comparison& c);
void write_savings_csv(std::ostream& out, const Comparison& c);
std::string heatmaps_to_json(const std::vector<Heatmap>& maps);
std::vector<Heatmap> heatmaps_from_json(const std::string& text);
std::string transitions_to_json(const TransitionGraph& g);

// comparison.csv, savings.csv, heatmaps.json, transitions.json in out_dir.
void export_reports(const std::filesystem::path& out_dir, const Comparison& c, const std::vector<Heatmap>& maps,
                    const TransitionGraph& g);

}  // namespace pivotdt

#endif  // PIVOTDT_ANALYSIS_HPP_
