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

#include "pivotdt/inference.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "pivotdt/errors.hpp"
#include "pivotdt/parallel.hpp"

namespace pivotdt {

void InferenceConfig::validate() const {
  if (n_rollouts < 1) throw ConfigError("infer.n_rollouts must be at least 1");
  if (max_steps < 1) throw ConfigError("infer.max_steps must be at least 1");
  if (!(epsilon_infer >= 0.0 && epsilon_infer <= 1.0)) throw ConfigError("infer.epsilon_infer must be in [0, 1]");
  if (!std::isfinite(target_return)) throw ConfigError("infer.target_return must be finite");
  if (!std::isfinite(reward_threshold)) throw ConfigError("infer.reward_threshold must be finite");
}

PivotIndex select_action(std::span<const double> pi, double last_reward, const InferenceConfig& cfg, Rng& rng) {
  if (pi.empty()) throw ValidationError("policy vector is empty");
  double sum = 0.0;
  for (double p : pi) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("policy vector has a negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("policy vector sums to " + std::to_string(sum) + ", not 1");
  const auto argmax = [&] {
    return PivotIndex{static_cast<int>(std::max_element(pi.begin(), pi.end()) - pi.begin())};
  };
  if (last_reward > cfg.reward_threshold) return argmax();
  if (uniform01(rng) < cfg.epsilon_infer) return argmax();
  return PivotIndex{uniform_int(rng, static_cast<int>(pi.size()))};
}

EpisodeResult conditioned_rollout(const DecisionTransformer<float>& model, const SymMatrix& a,
                                  const InferenceConfig& cfg, const RewardConfig& reward, Rng& rng,
                                  std::vector<Return>* rg_trace) {
  const DTConfig& dt = model.config();
  if (a.dim() != dt.n) {
    throw DimensionError("matrix is " + std::to_string(a.dim()) + "x" + std::to_string(a.dim()) +
                         " but the model expects n=" + std::to_string(dt.n) + "; pad it first");
  }
  RewardConfig rc = reward;
  rc.max_steps = cfg.max_steps;
  JacobiEnv env(a, rc);

  const int k = dt.context_timesteps;
  const int sd = dt.state_dim();
  std::vector<double> hist_rg;
  std::vector<SymMatrix> hist_state;
  std::vector<int> hist_action;
  Return rg = static_cast<Return>(cfg.target_return);
  double last_reward = 0.0;

  while (!env.done()) {
    hist_rg.push_back(static_cast<double>(rg));
    hist_state.push_back(env.state());
    hist_action.push_back(0);  // placeholder; the action head never attends to it
    if (rg_trace) rg_trace->push_back(rg);

    const int total = static_cast<int>(hist_rg.size());
    const int first = std::max(0, total - k);
    EpisodeTokens ep;
    ep.length = total - first;
    ep.rg.assign(k, 0.0);
    ep.states.assign(static_cast<std::size_t>(k) * sd, 0.0);
    ep.actions.assign(k, 0);
    ep.mask.assign(k, 0);
    ep.timesteps.resize(k);
    ep.rg_target.assign(k, 0.0);
    for (int t = 0; t < k; ++t) ep.timesteps[t] = t;
    for (int t = 0; t < ep.length; ++t) {
      const auto src = static_cast<std::size_t>(first + t);
      ep.rg[t] = hist_rg[src];
      write_state_features(hist_state[src], dt, ep.states.data() + static_cast<std::ptrdiff_t>(t) * sd);
      ep.actions[t] = hist_action[src];
      ep.mask[t] = 1;
    }

    const std::vector<double> pi = policy_probabilities(model, ep);
    const PivotIndex action = select_action(pi, last_reward, cfg, rng);
    hist_action.back() = action.value;
    const StepResult r = env.step(action);
    last_reward = r.reward;
    rg -= static_cast<Return>(r.reward);
  }
  return episode_result(env);
}

BestOfRollouts best_of_rollouts(const DecisionTransformer<float>& model, const SymMatrix& a,
                                const InferenceConfig& cfg, const RewardConfig& reward, std::uint64_t seed,
                                int workers) {
  cfg.validate();
  BestOfRollouts out;
  out.all.resize(static_cast<std::size_t>(cfg.n_rollouts));
  parallel_for(cfg.n_rollouts, workers, [&](int r) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(r)});
    out.all[static_cast<std::size_t>(r)] = conditioned_rollout(model, a, cfg, reward, rng);
  });
  for (int r = 0; r < cfg.n_rollouts; ++r) {
    const auto& e = out.all[static_cast<std::size_t>(r)];
    if (e.terminated && (!out.success || e.steps < out.best.steps)) {
      out.success = true;
      out.best = e;
      out.best_index = r;
    }
  }
  if (!out.success) out.best = out.all.front();
  return out;
}

EvalSummary summarize(const std::vector<EvalRow>& rows) {
  EvalSummary s;
  s.matrices = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  double dt = 0.0, me = 0.0, term = 0.0;
  for (const auto& r : rows) {
    dt += r.dt_steps;
    me += r.max_elem_steps;
    term += r.dt_terminated ? 1.0 : 0.0;
  }
  const double m = static_cast<double>(rows.size());
  s.mean_dt_steps = dt / m;
  s.mean_max_elem_steps = me / m;
  s.mean_savings = s.mean_max_elem_steps - s.mean_dt_steps;
  s.percent_savings = s.mean_max_elem_steps > 0.0 ? 100.0 * s.mean_savings / s.mean_max_elem_steps : 0.0;
  s.dt_termination_rate = term / m;
  return s;
}

namespace {

EvalReport run_eval(const DecisionTransformer<float>& model, const std::vector<const DatasetEntry*>& entries,
                    const InferenceConfig& cfg, const RewardConfig& reward, int workers) {
  cfg.validate();
  reward.validate();
  const int n = model.config().n;
  const int m = static_cast<int>(entries.size());
  const int r = cfg.n_rollouts;
  std::vector<SymMatrix> padded(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) padded[static_cast<std::size_t>(i)] = pad_matrix(entries[static_cast<std::size_t>(i)]->matrix, n);

  RewardConfig rc = reward;
  rc.max_steps = cfg.max_steps;
  std::vector<EpisodeResult> rollouts(static_cast<std::size_t>(m) * static_cast<std::size_t>(r));
  std::vector<EpisodeResult> baseline(static_cast<std::size_t>(m));
  parallel_for(m * r + m, workers, [&](int job) {
    if (job >= m * r) {
      const int i = job - m * r;
      baseline[static_cast<std::size_t>(i)] = max_element_solve(entries[static_cast<std::size_t>(i)]->matrix, rc);
      return;
    }
    const int i = job / r;
    const std::uint64_t seed = derive_seed(cfg.seed, {stream::kRollout, static_cast<std::uint64_t>(entries[static_cast<std::size_t>(i)]->id)});
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(job % r)});
    rollouts[static_cast<std::size_t>(job)] = conditioned_rollout(model, padded[static_cast<std::size_t>(i)], cfg, reward, rng);
  });

  EvalReport rep;
  for (int i = 0; i < m; ++i) {
    const int id = entries[static_cast<std::size_t>(i)]->id;
    int best = -1;
    for (int j = 0; j < r; ++j) {
      const auto& e = rollouts[static_cast<std::size_t>(i * r + j)];
      rep.all_episodes.push_back({id, "dt", e});
      if (e.terminated && (best < 0 || e.steps < rollouts[static_cast<std::size_t>(i * r + best)].steps)) best = j;
    }
    const auto& chosen = rollouts[static_cast<std::size_t>(i * r + std::max(best, 0))];
    const auto& me = baseline[static_cast<std::size_t>(i)];
    rep.dt_episodes.push_back({id, "dt", chosen});
    rep.rows.push_back({id, chosen.steps, chosen.terminated, me.steps, me.terminated, me.steps - chosen.steps});
  }
  rep.summary = summarize(rep.rows);
  return rep;
}

}  // namespace

EvalReport evaluate(const DecisionTransformer<float>& model, const std::vector<const DatasetEntry*>& entries,
                    const InferenceConfig& cfg, const RewardConfig& reward, int workers) {
  return run_eval(model, entries, cfg, reward, workers);
}

TransferReport transfer_eval(const DecisionTransformer<float>& model, const std::vector<const DatasetEntry*>& entries,
                             const InferenceConfig& cfg, const RewardConfig& reward, int workers) {
  if (entries.empty()) throw ValidationError("transfer evaluation needs at least one matrix");
  TransferReport t;
  t.source_n = model.config().n;
  t.target_n = entries.front()->matrix.dim();
  for (const auto* e : entries) {
    if (e->matrix.dim() != t.target_n) throw DimensionError("transfer dataset mixes matrix sizes");
  }
  if (t.target_n > t.source_n) {
    throw DimensionError("cannot transfer a model trained at n=" + std::to_string(t.source_n) + " to " +
                         std::to_string(t.target_n) + "x" + std::to_string(t.target_n) + " matrices");
  }
  t.report = run_eval(model, entries, cfg, reward, workers);
  return t;
}

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << "matrix_id,dt_steps,max_elem_steps,savings\n";
  for (const auto& r : rows) out << r.matrix_id << ',' << r.dt_steps << ',' << r.max_elem_steps << ',' << r.savings << '\n';
}

std::string eval_summary_json(const EvalSummary& s) {
  nlohmann::ordered_json j;
  j["matrices"] = s.matrices;
  j["mean_dt_steps"] = s.mean_dt_steps;
  j["mean_max_elem_steps"] = s.mean_max_elem_steps;
  j["mean_savings"] = s.mean_savings;
  j["percent_savings"] = s.percent_savings;
  j["dt_termination_rate"] = s.dt_termination_rate;
  return j.dump(2);
}

}  // namespace pivotdt
