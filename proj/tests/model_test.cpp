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
#include <numeric>

#include "doctest.h"
#include "pivotdt/baselines.hpp"
#include "pivotdt/checkpoint.hpp"
#include "pivotdt/datagen.hpp"
#include "pivotdt/errors.hpp"
#include "pivotdt/model.hpp"

using namespace pivotdt;

namespace {

DTConfig tiny_config() {
  DTConfig c;
  c.n = 3;
  c.n_blocks = 1;
  c.n_heads = 2;
  c.embed_dim = 16;
  c.context_timesteps = 6;
  c.dropout = 0.0;
  c.batch_size = 3;
  return c;
}

Trajectory random_trajectory(int n, int len, Rng& rng) {
  RewardConfig rc;
  rc.max_steps = len;
  const SymMatrix a = sample_symmetric_matrix(n, rng);
  PivotSequence seq;
  for (int i = 0; i < len; ++i) seq.push_back(PivotIndex{uniform_int(rng, pivot_count(n))});
  return rollout_with_sequence(a, seq, rc);
}

TokenBatch random_batch(const DTConfig& c, int episodes, Rng& rng) {
  TokenBatch b;
  b.context_timesteps = c.context_timesteps;
  for (int e = 0; e < episodes; ++e) {
    b.episodes.push_back(embed_tokens(random_trajectory(c.n, 2 + e % (c.context_timesteps + 2), rng), c));
  }
  return b;
}

}  // namespace

TEST_CASE("config validation") {
  DTConfig c;
  c.embed_dim = 30;
  c.n_heads = 8;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DTConfig{};
  c.psi = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(DTConfig{}.state_dim() == 25);
  CHECK(DTConfig{}.action_count() == 10);
}

TEST_CASE("token embedding layout") {
  const DTConfig c = tiny_config();
  Rng rng = make_rng(1);
  const Trajectory one = random_trajectory(3, 1, rng);
  const EpisodeTokens e1 = embed_tokens(one, c);
  CHECK(e1.length == 1);
  CHECK(std::accumulate(e1.mask.begin(), e1.mask.end(), 0) == 1);
  CHECK(e1.rg[0] == static_cast<double>(one.steps[0].r2g));
  CHECK(e1.rg_target[0] == static_cast<double>(one.steps[0].r2g - static_cast<Return>(one.steps[0].reward)));

  const Trajectory full = random_trajectory(3, c.context_timesteps, rng);
  const EpisodeTokens ek = embed_tokens(full, c);
  CHECK(ek.length == c.context_timesteps);
  CHECK(std::accumulate(ek.mask.begin(), ek.mask.end(), 0) == c.context_timesteps);

  // Longer episodes keep the most recent steps.
  const Trajectory longer = random_trajectory(3, c.context_timesteps + 3, rng);
  const EpisodeTokens el = embed_tokens(longer, c);
  CHECK(el.length == c.context_timesteps);
  CHECK(el.actions[0] == longer.steps[3].action.value);
  CHECK(el.rg.back() == static_cast<double>(longer.steps.back().r2g));

  // Only the changed R2G token differs.
  Trajectory other = full;
  other.steps[0].r2g += 1;
  const EpisodeTokens eo = embed_tokens(other, c);
  CHECK(eo.states == ek.states);
  CHECK(eo.actions == ek.actions);
  CHECK(eo.rg[0] != ek.rg[0]);
  for (int t = 1; t < c.context_timesteps; ++t) CHECK(eo.rg[t] == ek.rg[t]);
  DecisionTransformer<double> m(c);
  Rng init = make_rng(2);
  m.init(init);
  const RowMat<double> xa = m.embed(ek), xb = m.embed(eo);
  CHECK(xa.rows() == 3 * c.context_timesteps);
  for (Eigen::Index r = 0; r < xa.rows(); ++r) CHECK((xa.row(r) == xb.row(r)) == (r != 0));

  DTConfig wrong = c;
  wrong.n = 4;
  CHECK_THROWS_AS(embed_tokens(full, wrong), ConfigError);
}

TEST_CASE("state features") {
  DTConfig c = tiny_config();
  const SymMatrix a = SymMatrix::from_rows({{2.0, 1e-4, -4e-4}, {1e-4, -1.0, 0.0}, {-4e-4, 0.0, 0.5}});
  std::vector<double> out(9);
  c.state_features = DTConfig::StateFeatures::kScaled;
  write_state_features(a, c, out.data());
  CHECK(std::equal(out.begin(), out.end(), a.values().begin()));
  c.state_features = DTConfig::StateFeatures::kOffdiagNormalized;
  write_state_features(a, c, out.data());
  CHECK(out == std::vector<double>{2.0, 0.25, -1.0, 0.25, -1.0, 0.0, -1.0, 0.0, 0.5});
  const SymMatrix d = SymMatrix::diagonal({1.0, 2.0, 3.0});
  write_state_features(d, c, out.data());
  CHECK(std::equal(out.begin(), out.end(), d.values().begin()));
  CHECK(state_features_from_string(to_string(c.state_features)) == c.state_features);
  CHECK_THROWS_AS(state_features_from_string("raw"), ConfigError);
}

TEST_CASE("causality is exact") {
  DTConfig c = tiny_config();
  c.n_blocks = 2;
  DecisionTransformer<float> m(c);
  Rng rng = make_rng(3);
  m.init(rng);
  const Trajectory tr = random_trajectory(3, c.context_timesteps, rng);
  const EpisodeTokens base = embed_tokens(tr, c);
  const auto ref = m.forward(base, Mode::kEval);
  for (int t = 0; t < c.context_timesteps; ++t) {
    EpisodeTokens p = base;
    for (int u = t; u < c.context_timesteps; ++u) {
      p.rg[u] += 3.0;
      p.actions[u] = (p.actions[u] + 1) % c.action_count();
      for (int s = 0; s < c.state_dim(); ++s) p.states[u * c.state_dim() + s] *= -0.5;
    }
    const auto out = m.forward(p, Mode::kEval);
    for (int u = 0; u < t; ++u) {
      CHECK((out.action_logits.row(u) == ref.action_logits.row(u)));
      CHECK(out.r2g_pred[u] == ref.r2g_pred[u]);
    }
    // The action head never sees the action of its own step.
    EpisodeTokens q = base;
    q.actions[t] = (q.actions[t] + 1) % c.action_count();
    const auto oq = m.forward(q, Mode::kEval);
    CHECK((oq.action_logits.row(t) == ref.action_logits.row(t)));
  }
}

TEST_CASE("policy normalization and eval determinism") {
  const DTConfig c = tiny_config();
  DecisionTransformer<float> m(c);
  Rng rng = make_rng(4);
  m.init(rng);
  for (int i = 0; i < 20; ++i) {
    const EpisodeTokens ep = embed_tokens(random_trajectory(3, 1 + i % 8, rng), c);
    const auto p = policy_probabilities(m, ep);
    CHECK(p.size() == 3);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
    const auto a = m.forward(ep, Mode::kEval);
    const auto b = m.forward(ep, Mode::kEval);
    CHECK(a.action_logits == b.action_logits);
    CHECK(a.r2g_pred == b.r2g_pred);
  }
}

TEST_CASE("composite loss") {
  DTConfig c = tiny_config();
  c.n = 5;
  std::vector<ForwardOutput<double>> outs(1);
  TokenBatch b;
  b.context_timesteps = c.context_timesteps;
  Rng rng = make_rng(5);
  b.episodes.push_back(embed_tokens(random_trajectory(5, 4, rng), c));
  outs[0].action_logits = RowMat<double>::Zero(4, 10);
  outs[0].r2g_pred = {0.0, 0.0, 0.0, 0.0};
  const LossBreakdown both = composite_loss(outs, b, 0.5);
  CHECK(both.ce == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK(both.timesteps == 4);
  double mse = 0;
  for (int t = 0; t < 4; ++t) mse += b.episodes[0].rg_target[t] * b.episodes[0].rg_target[t];
  CHECK(both.mse == doctest::Approx(mse / 4).epsilon(1e-12));
  CHECK(both.loss == doctest::Approx(0.5 * both.ce + 0.5 * both.mse).epsilon(1e-12));
  CHECK(composite_loss(outs, b, 1.0).loss == doctest::Approx(both.ce).epsilon(1e-12));
  CHECK(composite_loss(outs, b, 0.0).loss == doctest::Approx(both.mse).epsilon(1e-12));

  TokenBatch empty;
  empty.context_timesteps = c.context_timesteps;
  empty.episodes.push_back(embed_tokens(Trajectory{}, c));
  std::vector<ForwardOutput<double>> none(1);
  none[0].action_logits = RowMat<double>::Zero(0, 10);
  CHECK_THROWS_AS(composite_loss(none, empty, 0.5), ValidationError);
}

TEST_CASE("gradients match central finite differences") {
  DTConfig c = tiny_config();
  c.psi = 0.5;
  DecisionTransformer<double> m(c);
  Rng rng = make_rng(6);
  m.init(rng);
  // Move LayerNorm and bias parameters off their initial values so every
  // path carries gradient.
  for (auto& p : m.params()) p += 0.05 * (uniform01(rng) - 0.5);
  const TokenBatch batch = random_batch(c, 3, rng);
  ParamVec<double> grad;
  loss_and_gradient(m, batch, Mode::kEval, 0, &grad, 1);
  REQUIRE(grad.size() == m.params().size());

  const double h = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < 25; ++probe) {
    const auto idx = static_cast<std::size_t>(uniform_int(rng, static_cast<int>(m.params().size())));
    const double saved = m.params()[idx];
    m.params()[idx] = saved + h;
    const double up = loss_and_gradient<double>(m, batch, Mode::kEval, 0, nullptr, 1).loss;
    m.params()[idx] = saved - h;
    const double down = loss_and_gradient<double>(m, batch, Mode::kEval, 0, nullptr, 1).loss;
    m.params()[idx] = saved;
    const double fd = (up - down) / (2 * h);
    const double rel = std::abs(fd - grad[idx]) / std::max(1e-6, std::abs(fd) + std::abs(grad[idx]));
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("every parameter tensor receives gradient") {
  DTConfig c = tiny_config();
  DecisionTransformer<double> m(c);
  Rng rng = make_rng(7);
  m.init(rng);
  for (auto& p : m.params()) p += 0.05 * (uniform01(rng) - 0.5);
  const TokenBatch batch = random_batch(c, 3, rng);
  ParamVec<double> grad;
  loss_and_gradient(m, batch, Mode::kEval, 0, &grad, 1);
  for (const auto& p : m.layout().params()) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(grad[p.offset + i]);
    CHECK_MESSAGE(s > 0.0, p.name);
  }
}

TEST_CASE("gradient reduction does not depend on worker count") {
  DTConfig c = tiny_config();
  c.dropout = 0.1;
  DecisionTransformer<float> m(c);
  Rng rng = make_rng(8);
  m.init(rng);
  const TokenBatch batch = random_batch(c, 9, rng);
  ParamVec<float> g1, g3;
  const auto l1 = loss_and_gradient(m, batch, Mode::kTrain, 42, &g1, 1);
  const auto l3 = loss_and_gradient(m, batch, Mode::kTrain, 42, &g3, 3);
  CHECK(l1.loss == l3.loss);
  CHECK(g1 == g3);
}

TEST_CASE("optimizer") {
  DTConfig c = tiny_config();
  c.learning_rate = 0.0;
  c.weight_decay = 0.0;
  DecisionTransformer<float> m(c);
  Rng rng = make_rng(9);
  m.init(rng);
  const auto before = m.params();
  const TokenBatch batch = random_batch(c, 3, rng);
  ParamVec<float> grad;
  Optimizer<float> opt(c);
  loss_and_gradient(m, batch, Mode::kTrain, 1, &grad, 1);
  opt.step(m.layout(), m.params(), grad);
  CHECK(m.params() == before);

  c.optimizer = DTConfig::Optimizer::kSgd;
  Optimizer<float> sgd(c);
  sgd.step(m.layout(), m.params(), grad);
  CHECK(m.params() == before);

  ParamVec<float> bad(grad.size(), 0.0f);
  bad[0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(opt.step(m.layout(), m.params(), bad), NumericError);
}

TEST_CASE("training is deterministic") {
  DTConfig c = tiny_config();
  c.dropout = 0.1;
  c.learning_rate = 1e-3;
  Rng data = make_rng(10);
  const TokenBatch batch = random_batch(c, 4, data);
  auto run = [&] {
    DecisionTransformer<float> m(c);
    Rng rng = make_rng(11);
    m.init(rng);
    Optimizer<float> opt(c);
    ParamVec<float> grad;
    for (int s = 0; s < 2; ++s) {
      loss_and_gradient(m, batch, Mode::kTrain, static_cast<std::uint64_t>(s), &grad, 1);
      opt.step(m.layout(), m.params(), grad);
    }
    return m.params();
  };
  CHECK(run() == run());
}

TEST_CASE("loss falls on a fixed batch at desk scale") {
  DTConfig c;
  c.n_blocks = 2;
  c.n_heads = 4;
  c.embed_dim = 64;
  c.learning_rate = 1e-3;
  c.dropout = 0.0;
  Rng data = make_rng(12);
  TokenBatch batch;
  batch.context_timesteps = c.context_timesteps;
  for (int e = 0; e < 8; ++e) {
    const SymMatrix a = sample_symmetric_matrix(5, data);
    RewardConfig rc;
    batch.episodes.push_back(embed_tokens(rollout_with_sequence(a, max_element_solve(a, rc).pivot_sequence, rc), c));
  }
  DecisionTransformer<float> m(c);
  Rng rng = make_rng(13);
  m.init(rng);
  Optimizer<float> opt(c);
  ParamVec<float> grad;
  double prev = loss_and_gradient(m, batch, Mode::kTrain, 0, &grad, 1).loss;
  int rises = 0;
  for (int s = 0; s < 50; ++s) {
    opt.step(m.layout(), m.params(), grad);
    const double l = loss_and_gradient(m, batch, Mode::kTrain, 0, &grad, 1).loss;
    rises += l >= prev;
    prev = l;
  }
  CHECK(rises <= 5);
}

TEST_CASE("checkpoint round trip") {
  const DTConfig c = tiny_config();
  DecisionTransformer<float> m(c);
  Rng rng = make_rng(14);
  m.init(rng);
  const std::string bytes = serialize_checkpoint(m, "00ff00ff00ff00ff", 99);
  CHECK(bytes.substr(0, 8) == "PIVOTDT1");
  const LoadedCheckpoint back = parse_checkpoint(bytes);
  CHECK(back.model.config() == c);
  CHECK(back.model.params() == m.params());
  CHECK(back.dataset_fingerprint == "00ff00ff00ff00ff");
  CHECK(back.seed == 99);
  CHECK(serialize_checkpoint(back.model, "00ff00ff00ff00ff", 99) == bytes);

  CHECK_THROWS_AS(parse_checkpoint(bytes, 5), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 4)), FormatError);
  try {
    parse_checkpoint(bytes, 4);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("config.n") != std::string::npos);
  }
}
