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

#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pivotdt/errors.hpp"
#include "pivotdt/inference.hpp"

using namespace pivotdt;

namespace {

DecisionTransformer<float> random_model(int n, std::uint64_t seed = 3) {
  DTConfig c;
  c.n = n;
  c.n_blocks = 1;
  c.n_heads = 2;
  c.embed_dim = 16;
  c.context_timesteps = 6;
  DecisionTransformer<float> m(c);
  Rng rng = make_rng(seed);
  m.init(rng);
  return m;
}

InferenceConfig small_infer() {
  InferenceConfig c;
  c.n_rollouts = 4;
  c.max_steps = 30;
  c.seed = 9;
  return c;
}

std::vector<DatasetEntry> random_entries(int n, int count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<DatasetEntry> out;
  for (int i = 0; i < count; ++i) out.push_back({i, sample_symmetric_matrix(n, rng), Split::kTest});
  return out;
}

std::vector<const DatasetEntry*> pointers(const std::vector<DatasetEntry>& v) {
  std::vector<const DatasetEntry*> p;
  for (const auto& e : v) p.push_back(&e);
  return p;
}

}  // namespace

TEST_CASE("action selection") {
  const std::vector<double> pi = {0.05, 0.1, 0.6, 0.05, 0.05, 0.05, 0.025, 0.025, 0.025, 0.025};
  InferenceConfig c;
  c.reward_threshold = -0.1;
  Rng rng = make_rng(1);

  SUBCASE("a good last reward is always greedy") {
    c.epsilon_infer = 0.0;
    for (int i = 0; i < 50; ++i) CHECK(select_action(pi, 0.9, c, rng).value == 2);
  }
  SUBCASE("epsilon one is greedy") {
    c.epsilon_infer = 1.0;
    for (int i = 0; i < 50; ++i) CHECK(select_action(pi, -1.1, c, rng).value == 2);
  }
  SUBCASE("epsilon zero is uniform") {
    c.epsilon_infer = 0.0;
    std::vector<int> counts(10, 0);
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(select_action(pi, -0.1, c, rng).value)];
    const double sigma = std::sqrt(draws * 0.1 * 0.9);
    for (int k : counts) CHECK(std::abs(k - draws * 0.1) < 4.0 * sigma);
  }
  SUBCASE("mixed epsilon") {
    c.epsilon_infer = 0.475;
    int greedy = 0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) greedy += select_action(pi, -0.5, c, rng).value == 2 ? 1 : 0;
    const double p = 0.475 + 0.525 * 0.1;
    CHECK(std::abs(greedy - draws * p) < 4.0 * std::sqrt(draws * p * (1 - p)));
  }
  SUBCASE("invalid policy vectors") {
    const std::vector<double> bad = {0.5, 0.6};
    CHECK_THROWS_AS(select_action(bad, 0.0, c, rng), ValidationError);
    const std::vector<double> neg = {1.5, -0.5};
    CHECK_THROWS_AS(select_action(neg, 0.0, c, rng), ValidationError);
    CHECK_THROWS_AS(select_action(std::vector<double>{}, 0.0, c, rng), ValidationError);
  }
}

TEST_CASE("inference config validation") {
  InferenceConfig c;
  c.n_rollouts = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = InferenceConfig{};
  c.epsilon_infer = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("diagonal input needs no steps") {
  const auto model = random_model(3);
  Rng rng = make_rng(2);
  const EpisodeResult e = conditioned_rollout(model, SymMatrix::diagonal({1.0, 2.0, 3.0}), small_infer(), {}, rng);
  CHECK(e.steps == 0);
  CHECK(e.terminated);
  CHECK(e.pivot_sequence.empty());
}

TEST_CASE("a 2x2 matrix is solved in one step") {
  const auto model = random_model(2);
  Rng rng = make_rng(2);
  const EpisodeResult e = conditioned_rollout(model, SymMatrix::from_rows({{1.0, 0.5}, {0.5, -2.0}}), small_infer(), {}, rng);
  CHECK(e.steps == 1);
  CHECK(e.terminated);
}

TEST_CASE("rollouts are reproducible and replayable") {
  const auto model = random_model(4);
  Rng src = make_rng(5);
  const SymMatrix a = sample_symmetric_matrix(4, src);
  const InferenceConfig c = small_infer();
  RewardConfig rc;
  Rng r1 = make_rng(7), r2 = make_rng(7);
  std::vector<Return> trace;
  const EpisodeResult e1 = conditioned_rollout(model, a, c, rc, r1, &trace);
  const EpisodeResult e2 = conditioned_rollout(model, a, c, rc, r2);
  CHECK(e1 == e2);
  CHECK(e1.steps <= c.max_steps);

  rc.max_steps = c.max_steps;
  const Trajectory replay = rollout_with_sequence(a, e1.pivot_sequence, rc);
  CHECK(replay.length() == e1.steps);
  CHECK(replay.terminated == e1.terminated);

  REQUIRE(trace.size() == static_cast<std::size_t>(e1.steps));
  if (!trace.empty()) CHECK(trace.front() == static_cast<Return>(c.target_return));
  for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
    CHECK(trace[t] - trace[t + 1] == static_cast<Return>(replay.steps[t].reward));
  }
}

TEST_CASE("dimension mismatch is rejected") {
  const auto model = random_model(3);
  Rng rng = make_rng(1);
  const SymMatrix a = sample_symmetric_matrix(4, rng);
  CHECK_THROWS_AS(conditioned_rollout(model, a, small_infer(), {}, rng), DimensionError);
}

TEST_CASE("best of rollouts") {
  const auto model = random_model(3);
  Rng src = make_rng(8);
  const SymMatrix a = sample_symmetric_matrix(3, src);
  InferenceConfig c = small_infer();
  c.n_rollouts = 6;
  const BestOfRollouts b = best_of_rollouts(model, a, c, {}, 42);
  REQUIRE(b.all.size() == 6u);
  for (const auto& e : b.all) {
    if (e.terminated) CHECK(b.best.steps <= e.steps);
  }
  CHECK(b.best == b.all[static_cast<std::size_t>(b.best_index)]);
  const BestOfRollouts again = best_of_rollouts(model, a, c, {}, 42, 3);
  for (std::size_t i = 0; i < 6; ++i) CHECK(again.all[i] == b.all[i]);

  c.n_rollouts = 1;
  const BestOfRollouts one = best_of_rollouts(model, a, c, {}, 42);
  CHECK(one.best == one.all.front());
  CHECK(one.best == b.all.front());
}

TEST_CASE("summary arithmetic") {
  const std::vector<EvalRow> rows = {{0, 7, true, 14, true, 7}, {1, 7, true, 14, true, 7}};
  const EvalSummary s = summarize(rows);
  CHECK(s.mean_dt_steps == 7.0);
  CHECK(s.mean_max_elem_steps == 14.0);
  CHECK(s.mean_savings == 7.0);
  CHECK(s.percent_savings == 50.0);
  CHECK(s.dt_termination_rate == 1.0);
  CHECK(summarize({}).matrices == 0);
}

TEST_CASE("evaluation report") {
  const auto model = random_model(3);
  const auto entries = random_entries(3, 5, 4);
  const InferenceConfig c = small_infer();
  const EvalReport r = evaluate(model, pointers(entries), c, {});
  REQUIRE(r.rows.size() == 5u);
  CHECK(r.all_episodes.size() == 5u * static_cast<std::size_t>(c.n_rollouts));
  RewardConfig rc;
  rc.max_steps = c.max_steps;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& row = r.rows[i];
    CHECK(row.matrix_id == static_cast<int>(i));
    CHECK(row.max_elem_steps == max_element_solve(entries[i].matrix, rc).steps);
    CHECK(row.savings == row.max_elem_steps - row.dt_steps);
    CHECK(r.dt_episodes[i].result.steps == row.dt_steps);
  }
  const EvalReport again = evaluate(model, pointers(entries), c, {}, 4);
  for (std::size_t i = 0; i < r.all_episodes.size(); ++i) CHECK(again.all_episodes[i].result == r.all_episodes[i].result);

  std::ostringstream csv;
  write_eval_csv(csv, r.rows);
  CHECK(csv.str().rfind("matrix_id,dt_steps,max_elem_steps,savings\n", 0) == 0);
  const auto j = nlohmann::json::parse(eval_summary_json(r.summary));
  CHECK(j["matrices"] == 5);
  CHECK(j["mean_savings"].get<double>() == doctest::Approx(r.summary.mean_savings));
}

TEST_CASE("transfer to smaller matrices") {
  const auto model = random_model(4);
  const auto small = random_entries(3, 4, 6);
  const InferenceConfig c = small_infer();
  const TransferReport t = transfer_eval(model, pointers(small), c, {});
  CHECK(t.source_n == 4);
  CHECK(t.target_n == 3);
  REQUIRE(t.report.rows.size() == 4u);
  RewardConfig rc;
  rc.max_steps = c.max_steps;
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.report.rows[i].max_elem_steps == max_element_solve(small[i].matrix, rc).steps);

  const auto big = random_entries(5, 2, 6);
  CHECK_THROWS_AS(transfer_eval(model, pointers(big), c, {}), DimensionError);

  const auto same = random_entries(4, 3, 6);
  const TransferReport s = transfer_eval(model, pointers(same), c, {});
  const EvalReport e = evaluate(model, pointers(same), c, {});
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.report.rows[i].dt_steps == e.rows[i].dt_steps);

  std::vector<DatasetEntry> mixed = random_entries(3, 2, 1);
  mixed.push_back(random_entries(2, 1, 1).front());
  CHECK_THROWS_AS(transfer_eval(model, pointers(mixed), c, {}), DimensionError);
}

TEST_CASE("padding keeps the minimal sequence inside the block") {
  RewardConfig rc;
  Rng rng = make_rng(12);
  for (int i = 0; i < 6; ++i) {
    const SymMatrix a = sample_symmetric_matrix(3, rng);
    const ExhaustiveResult plain = exhaustive_min_sequence(a, 12, rc);
    const ExhaustiveResult padded = exhaustive_min_sequence(pad_matrix(a, 4), 12, rc);
    REQUIRE(plain.found);
    REQUIRE(padded.found);
    CHECK(plain.min_length == padded.min_length);
    for (PivotIndex p : padded.witness) {
      const PivotPair pp = pivot_to_pair(p, 4);
      CHECK(pp.row < 3);
      CHECK(pp.col < 3);
    }
  }
}
