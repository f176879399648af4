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

#include "pivotdt/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pivotdt/errors.hpp"

namespace pivotdt {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

Comparison compare_solvers(const std::vector<SolverRow>& rows) {
  std::map<std::string, std::map<int, const SolverRow*>> by_solver;
  for (const auto& r : rows) {
    if (!by_solver[r.solver].emplace(r.matrix_id, &r).second) {
      throw ValidationError("solver " + r.solver + " has two results for matrix " + std::to_string(r.matrix_id));
    }
  }
  Comparison c;
  if (by_solver.empty()) return c;
  std::set<int> ids;
  for (const auto& [id, row] : by_solver.begin()->second) ids.insert(id);
  for (const auto& [name, results] : by_solver) {
    std::set<int> mine;
    for (const auto& [id, row] : results) mine.insert(id);
    if (mine != ids) {
      throw ValidationError("solvers " + by_solver.begin()->first + " and " + name + " cover different matrices");
    }
    std::vector<int> steps;
    int term = 0;
    for (const auto& [id, row] : results) {
      steps.push_back(row->steps);
      term += row->terminated ? 1 : 0;
    }
    std::sort(steps.begin(), steps.end());
    SolverStats s;
    s.solver = name;
    s.matrices = static_cast<int>(steps.size());
    double sum = 0.0;
    for (int v : steps) sum += v;
    s.mean_steps = sum / s.matrices;
    const std::size_t mid = steps.size() / 2;
    s.median_steps = steps.size() % 2 ? steps[mid] : 0.5 * (steps[mid - 1] + steps[mid]);
    s.min_steps = steps.front();
    s.max_steps = steps.back();
    s.termination_rate = static_cast<double>(term) / s.matrices;
    c.solvers.push_back(s);
  }
  for (const auto& a : c.solvers) {
    for (const auto& b : c.solvers) {
      if (a.solver == b.solver) continue;
      PairSavings p{a.solver, b.solver, b.mean_steps - a.mean_steps, 0.0};
      p.percent_savings = b.mean_steps > 0.0 ? 100.0 * p.mean_savings / b.mean_steps : 0.0;
      c.savings.push_back(p);
    }
  }
  return c;
}

std::vector<Heatmap> pivot_heatmaps(const std::vector<EpisodeResult>& episodes, int n, int steps) {
  if (n < 2) throw DimensionError("heatmaps need n >= 2");
  if (steps < 0) throw ValidationError("steps must be non-negative");
  std::vector<Heatmap> maps(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    maps[s].step = s + 1;
    maps[s].matrix.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  }
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(steps),
                                       std::vector<int>(static_cast<std::size_t>(pivot_count(n)), 0));
  for (const auto& e : episodes) {
    const int len = std::min(steps, static_cast<int>(e.pivot_sequence.size()));
    for (int s = 0; s < len; ++s) {
      const PivotIndex k = e.pivot_sequence[static_cast<std::size_t>(s)];
      pivot_to_pair(k, n);
      ++counts[s][static_cast<std::size_t>(k.value)];
      ++maps[s].episodes;
    }
  }
  for (int s = 0; s < steps; ++s) {
    if (maps[s].episodes == 0) continue;
    for (int k = 0; k < pivot_count(n); ++k) {
      const PivotPair p = pivot_to_pair(PivotIndex{k}, n);
      const double f = static_cast<double>(counts[s][static_cast<std::size_t>(k)]) / maps[s].episodes;
      maps[s].matrix[p.row][p.col] = f;
      maps[s].matrix[p.col][p.row] = f;
    }
  }
  return maps;
}

TransitionGraph transition_graph(const std::vector<EpisodeResult>& episodes, int top_n) {
  if (top_n < 1) throw ValidationError("top_n must be at least 1");
  std::map<PivotSequence, int> freq;
  for (const auto& e : episodes) ++freq[e.pivot_sequence];
  std::vector<std::pair<PivotSequence, int>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(ranked.size()) > top_n) ranked.resize(static_cast<std::size_t>(top_n));

  TransitionGraph g;
  g.sequences = ranked;
  int covered = 0;
  std::size_t depth = 0;
  for (const auto& [seq, count] : ranked) {
    covered += count;
    depth = std::max(depth, seq.size());
  }
  g.coverage = episodes.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(episodes.size());

  g.layers.resize(depth);
  for (std::size_t s = 0; s < depth; ++s) {
    // Weighted counts of (from, to) among represented sequences continuing past step s.
    std::map<int, std::map<int, int>> trans;
    std::set<int> layer;
    for (const auto& [seq, count] : ranked) {
      if (seq.size() <= s) continue;
      const int from = s == 0 ? -1 : seq[s - 1].value;
      trans[from][seq[s].value] += count;
      layer.insert(seq[s].value);
    }
    g.layers[s].assign(layer.begin(), layer.end());
    for (const auto& [from, tos] : trans) {
      int total = 0;
      for (const auto& [to, c] : tos) total += c;
      for (const auto& [to, c] : tos) {
        g.edges.push_back({static_cast<int>(s) + 1, from, to, static_cast<double>(c) / total});
      }
    }
  }
  return g;
}

void write_comparison_csv(std::ostream& out, const Comparison& c) {
  out << "solver,matrices,mean_steps,median_steps,min_steps,max_steps,termination_rate\n";
  for (const auto& s : c.solvers) {
    out << s.solver << ',' << s.matrices << ',' << fmt(s.mean_steps) << ',' << fmt(s.median_steps) << ','
        << s.min_steps << ',' << s.max_steps << ',' << fmt(s.termination_rate) << '\n';
  }
}

void write_savings_csv(std::ostream& out, const Comparison& c) {
  out << "solver,reference,mean_savings,percent_savings\n";
  for (const auto& p : c.savings) {
    out << p.solver << ',' << p.reference << ',' << fmt(p.mean_savings) << ',' << fmt(p.percent_savings) << '\n';
  }
}

std::string heatmaps_to_json(const std::vector<Heatmap>& maps) {
  nlohmann::ordered_json j;
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& m : maps) {
    j["steps"].push_back({{"step", m.step}, {"episodes", m.episodes}, {"empty", m.empty()}, {"matrix", m.matrix}});
  }
  return j.dump() + "\n";
}

std::vector<Heatmap> heatmaps_from_json(const std::string& text) {
  std::vector<Heatmap> maps;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& s : j.at("steps")) {
      Heatmap h;
      h.step = s.at("step").get<int>();
      h.episodes = s.at("episodes").get<int>();
      h.matrix = s.at("matrix").get<std::vector<std::vector<double>>>();
      maps.push_back(std::move(h));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("heatmaps: ") + e.what());
  }
  return maps;
}

std::string transitions_to_json(const TransitionGraph& g) {
  nlohmann::ordered_json j;
  j["layers"] = g.layers;
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) j["edges"].push_back({{"step", e.step}, {"from", e.from}, {"to", e.to}, {"p", e.p}});
  j["coverage"] = g.coverage;
  j["sequences"] = nlohmann::ordered_json::array();
  for (const auto& [seq, count] : g.sequences) {
    std::vector<int> pivots;
    for (const auto& k : seq) pivots.push_back(k.value);
    j["sequences"].push_back({{"pivots", pivots}, {"count", count}});
  }
  return j.dump() + "\n";
}

void export_reports(const std::filesystem::path& out_dir, const Comparison& c, const std::vector<Heatmap>& maps,
                    const TransitionGraph& g) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error(out_dir.string() + ": " + ec.message());
  std::ostringstream cmp, sav;
  write_comparison_csv(cmp, c);
  write_savings_csv(sav, c);
  write_file(out_dir / "comparison.csv", cmp.str());
  write_file(out_dir / "savings.csv", sav.str());
  write_file(out_dir / "heatmaps.json", heatmaps_to_json(maps));
  write_file(out_dir / "transitions.json", transitions_to_json(g));
}

}  // namespace pivotdt
