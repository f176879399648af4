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

#include "pivotdt/datagen.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "pivotdt/parallel.hpp"

namespace pivotdt {

void MatrixDistribution::validate() const {
  if (kind == Kind::kUniform && !(low < high)) throw ConfigError("uniform distribution needs low < high");
  if (kind == Kind::kGaussian && !(stddev > 0.0)) throw ConfigError("gaussian distribution needs stddev > 0");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must be in (0, 1]");
}

std::string to_string(MatrixDistribution::Kind kind) {
  return kind == MatrixDistribution::Kind::kUniform ? "uniform" : "gaussian";
}

MatrixDistribution::Kind distribution_kind_from_string(const std::string& s) {
  if (s == "uniform") return MatrixDistribution::Kind::kUniform;
  if (s == "gaussian") return MatrixDistribution::Kind::kGaussian;
  throw ConfigError("unknown matrix distribution '" + s + "'");
}

SymMatrix sample_symmetric_matrix(int n, Rng& rng, const MatrixDistribution& dist) {
  if (n < 2) throw DimensionError("sample_symmetric_matrix needs n >= 2");
  dist.validate();
  std::normal_distribution<double> normal(0.0, dist.stddev);
  auto draw = [&] {
    if (dist.kind == MatrixDistribution::Kind::kGaussian) return normal(rng);
    return dist.low + (dist.high - dist.low) * uniform01(rng);
  };
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double v = draw();
      if (i != j && dist.density < 1.0 && uniform01(rng) >= dist.density) v = 0.0;
      m.set(i, j, v);
    }
  }
  return m;
}

namespace {

bool sequence_less(const PivotSequence& a, const PivotSequence& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<int> nonzero_pivots(const SymMatrix& a, ZeroTolerance tol) {
  std::vector<int> out;
  const int n = a.dim();
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++k) {
      if (std::abs(a(i, j)) > tol.value()) out.push_back(k);
    }
  }
  return out;
}

}  // namespace

void rank_pool(SequencePool& pool) {
  if (pool.sequences.empty()) throw ValidationError("sequence pool is empty");
  std::sort(pool.sequences.begin(), pool.sequences.end(), [](const RankedSequence& a, const RankedSequence& b) {
    if (a.total_return != b.total_return) return a.total_return > b.total_return;
    return sequence_less(a.pivots, b.pivots);
  });
  int best = -1;
  for (std::size_t i = 0; i < pool.sequences.size(); ++i) {
    pool.sequences[i].rank = static_cast<int>(i);
    if (!pool.sequences[i].terminated) continue;
    if (best < 0 || pool.sequences[i].length() < pool.sequences[static_cast<std::size_t>(best)].length()) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw ValidationError("sequence pool has no terminated sequence");
  pool.optimal_index = best;
}

namespace {

struct DfsState {
  const RewardConfig& cfg;
  PivotSequence path;
};

bool dfs(const SymMatrix& a, int depth_left, DfsState& st) {
  if (is_diagonal(a, st.cfg.tol)) return true;
  if (depth_left == 0) return false;
  for (int k : nonzero_pivots(a, st.cfg.tol)) {
    st.path.push_back(PivotIndex{k});
    if (dfs(jacobi_rotate(a, PivotIndex{k}), depth_left - 1, st)) return true;
    st.path.pop_back();
  }
  return false;
}

}  // namespace

ExhaustiveResult exhaustive_min_sequence(const SymMatrix& a, int depth_cap, const RewardConfig& cfg) {
  JacobiEnv env(a, cfg);  // validates and applies scaling
  const SymMatrix& start = env.state();
  const int cap = std::min(depth_cap, cfg.max_steps);
  DfsState st{cfg, {}};
  for (int depth = 0; depth <= cap; ++depth) {
    st.path.clear();
    if (dfs(start, depth, st)) return {true, depth, st.path};
  }
  return {};
}

void MctsConfig::validate() const {
  if (playouts < 1) throw ConfigError("playouts must be at least 1");
  if (!(exploration >= 0.0)) throw ConfigError("exploration constant must be non-negative");
  if (!(greedy_prob >= 0.0 && greedy_prob <= 1.0)) throw ConfigError("greedy_prob must be in [0, 1]");
}

std::string to_string(MctsConfig::Rollout r) {
  return r == MctsConfig::Rollout::kUniform ? "uniform" : "max-element-mix";
}

MctsConfig::Rollout rollout_from_string(const std::string& s) {
  if (s == "uniform") return MctsConfig::Rollout::kUniform;
  if (s == "max-element-mix") return MctsConfig::Rollout::kMaxElementMix;
  throw ConfigError("unknown rollout policy '" + s + "'");
}

namespace {

struct Node {
  SymMatrix state;
  int zeros = 0;
  int parent = -1;
  int depth = 0;
  double reward = 0.0;  // reward of the transition into this node
  bool diagonal = false;
  bool terminal = false;
  std::vector<int> untried;
  std::vector<std::pair<int, int>> children;  // (action, node index), in expansion order
  int visits = 0;
  double value_sum = 0.0;
};

class UctSearch {
 public:
  UctSearch(const SymMatrix& start, const MctsConfig& mcts, const RewardConfig& cfg, Rng& rng)
      : mcts_(mcts), cfg_(cfg), rng_(rng), actions_(pivot_count(start.dim())) {
    Node root;
    root.state = start;
    root.zeros = count_offdiag_zeros(start, cfg.tol);
    root.diagonal = root.zeros == actions_;
    root.terminal = root.diagonal || cfg.max_steps == 0;
    if (!root.terminal) root.untried = nonzero_pivots(start, cfg.tol);
    nodes_.push_back(std::move(root));
  }

  void playout() {
    std::vector<int> path{0};
    PivotSequence pivots;
    Return ret = 0;
    int cur = 0;
    while (!nodes_[cur].terminal && nodes_[cur].untried.empty()) {
      const auto [action, child] = select_child(cur);
      cur = child;
      path.push_back(cur);
      pivots.push_back(PivotIndex{action});
      ret += nodes_[cur].reward;
    }
    if (!nodes_[cur].terminal) {
      cur = expand(cur, pivots);
      path.push_back(cur);
      ret += nodes_[cur].reward;
    }
    bool terminated = nodes_[cur].diagonal;
    if (!nodes_[cur].terminal) terminated = rollout(nodes_[cur], pivots, ret);
    if (terminated) found_.try_emplace(pivots, ret);

    const double g = static_cast<double>(ret);
    min_return_ = std::min(min_return_, g);
    max_return_ = std::max(max_return_, g);
    for (int idx : path) {
      nodes_[idx].visits += 1;
      nodes_[idx].value_sum += g;
    }
  }

  const std::map<PivotSequence, Return>& found() const { return found_; }

 private:
  std::pair<int, int> select_child(int idx) {
    const Node& node = nodes_[idx];
    const double span = max_return_ - min_return_;
    const double log_n = std::log(static_cast<double>(std::max(1, node.visits)));
    double best_score = -std::numeric_limits<double>::infinity();
    std::pair<int, int> best = node.children.front();
    for (const auto& [action, child] : node.children) {
      const Node& c = nodes_[child];
      const double mean = c.value_sum / c.visits;
      // Returns are unbounded; the exploitation term is min-max normalized to [0, 1].
      const double q = span > 0.0 ? (mean - min_return_) / span : 0.5;
      const double score = q + mcts_.exploration * std::sqrt(log_n / c.visits);
      if (score > best_score) {
        best_score = score;
        best = {action, child};
      }
    }
    return best;
  }

  int expand(int idx, PivotSequence& pivots) {
    auto& untried = nodes_[idx].untried;
    const int pick = uniform_int(rng_, static_cast<int>(untried.size()));
    const int action = untried[static_cast<std::size_t>(pick)];
    untried.erase(untried.begin() + pick);

    Node child;
    child.state = jacobi_rotate(nodes_[idx].state, PivotIndex{action});
    child.zeros = count_offdiag_zeros(child.state, cfg_.tol);
    child.parent = idx;
    child.depth = nodes_[idx].depth + 1;
    child.diagonal = child.zeros == actions_;
    child.reward = transition_reward(nodes_[idx].zeros, child.zeros, child.diagonal, cfg_);
    child.terminal = child.diagonal || child.depth >= cfg_.max_steps;
    if (!child.terminal) child.untried = nonzero_pivots(child.state, cfg_.tol);
    const int child_idx = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(child));
    nodes_[idx].children.emplace_back(action, child_idx);
    pivots.push_back(PivotIndex{action});
    return child_idx;
  }

  bool rollout(const Node& from, PivotSequence& pivots, Return& ret) {
    SymMatrix state = from.state;
    int zeros = from.zeros;
    for (int depth = from.depth; depth < cfg_.max_steps; ++depth) {
      int action;
      if (mcts_.rollout == MctsConfig::Rollout::kMaxElementMix && uniform01(rng_) < mcts_.greedy_prob) {
        action = max_offdiag(state).pivot.value;
      } else {
        const auto legal = nonzero_pivots(state, cfg_.tol);
        action = legal[static_cast<std::size_t>(uniform_int(rng_, static_cast<int>(legal.size())))];
      }
      jacobi_rotate_inplace(state, PivotIndex{action});
      const int z = count_offdiag_zeros(state, cfg_.tol);
      const bool diag = z == actions_;
      ret += transition_reward(zeros, z, diag, cfg_);
      zeros = z;
      pivots.push_back(PivotIndex{action});
      if (diag) return true;
    }
    return false;
  }

  const MctsConfig& mcts_;
  const RewardConfig& cfg_;
  Rng& rng_;
  int actions_;
  std::vector<Node> nodes_;
  std::map<PivotSequence, Return> found_;
  double min_return_ = std::numeric_limits<double>::infinity();
  double max_return_ = -std::numeric_limits<double>::infinity();
};

}  // namespace

SequencePool mcts_search(const SymMatrix& a, const MctsConfig& mcts, const RewardConfig& cfg, Rng& rng,
                         int matrix_id) {
  mcts.validate();
  JacobiEnv env(a, cfg);
  SequencePool pool;
  pool.matrix_id = matrix_id;
  if (env.done()) {
    pool.sequences.push_back({{}, true, 0, 0});
    pool.optimal_index = 0;
    return pool;
  }
  UctSearch search(env.state(), mcts, cfg, rng);
  for (int p = 0; p < mcts.playouts; ++p) search.playout();
  if (search.found().empty()) {
    throw SearchError("MCTS found no diagonalizing sequence for matrix " + std::to_string(matrix_id) + " in " +
                      std::to_string(mcts.playouts) + " playouts");
  }
  for (const auto& [pivots, ret] : search.found()) pool.sequences.push_back({pivots, true, 0, ret});
  rank_pool(pool);
  return pool;
}

SequencePool top_k(const SequencePool& pool, int k) {
  SequencePool out = pool;
  rank_pool(out);
  if (k < 1) k = 1;
  if (static_cast<std::size_t>(k) >= out.sequences.size()) return out;
  const RankedSequence optimal = out.optimal();
  out.sequences.resize(static_cast<std::size_t>(k));
  if (std::none_of(out.sequences.begin(), out.sequences.end(),
                   [&](const RankedSequence& s) { return s.pivots == optimal.pivots; })) {
    out.sequences.back() = optimal;
  }
  rank_pool(out);
  return out;
}

const RankedSequence& epsilon_greedy_select(const SequencePool& pool, double epsilon, Rng& rng) {
  if (pool.sequences.empty()) throw ValidationError("cannot select from an empty sequence pool");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must be in [0, 1]");
  if (uniform01(rng) < epsilon) {
    return pool.sequences[static_cast<std::size_t>(uniform_int(rng, static_cast<int>(pool.sequences.size())))];
  }
  return pool.optimal();
}

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split '" + s + "'");
}

std::vector<const DatasetEntry*> MatrixDataset::entries(Split s) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : matrices) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

const DatasetEntry& MatrixDataset::by_id(int id) const {
  for (const auto& e : matrices) {
    if (e.id == id) return e;
  }
  throw ValidationError("no matrix with id " + std::to_string(id));
}

MatrixDataset split_dataset(std::vector<SymMatrix> matrices, double fraction, Rng& rng) {
  if (matrices.size() < 2) throw ValidationError("split_dataset needs at least 2 matrices");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split fraction must be in (0, 1)");
  const int count = static_cast<int>(matrices.size());
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with our own integer draw, so the split is identical across standard libraries.
  for (int i = count - 1; i > 0; --i) std::swap(order[i], order[uniform_int(rng, i + 1)]);
  const int train = std::clamp(static_cast<int>(std::lround(fraction * count)), 1, count - 1);

  MatrixDataset ds;
  ds.matrices.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    ds.matrices[i] = {i, std::move(matrices[i]), Split::kTest};
  }
  for (int i = 0; i < train; ++i) ds.matrices[order[i]].split = Split::kTrain;
  return ds;
}

MatrixDataset generate_matrices(int n, int count, const MatrixDistribution& dist, double train_fraction,
                                std::uint64_t seed) {
  std::vector<SymMatrix> ms;
  ms.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {stream::kMatrix, static_cast<std::uint64_t>(i)});
    ms.push_back(sample_symmetric_matrix(n, rng, dist));
  }
  Rng split_rng = make_rng(seed, {stream::kSplit});
  return split_dataset(std::move(ms), train_fraction, split_rng);
}

void generate_pools(MatrixDataset& dataset, const MctsConfig& mcts, const RewardConfig& cfg, int top_k_count,
                    std::uint64_t seed, int workers) {
  std::vector<SequencePool> pools(dataset.matrices.size());
  parallel_for(static_cast<int>(dataset.matrices.size()), workers, [&](int i) {
    const auto& e = dataset.matrices[static_cast<std::size_t>(i)];
    Rng rng = make_rng(seed, {stream::kMcts, static_cast<std::uint64_t>(e.id)});
    pools[static_cast<std::size_t>(i)] = top_k(mcts_search(e.matrix, mcts, cfg, rng, e.id), top_k_count);
  });
  dataset.pools.clear();
  for (auto& p : pools) dataset.pools.emplace(p.matrix_id, std::move(p));
}

}  // namespace pivotdt
