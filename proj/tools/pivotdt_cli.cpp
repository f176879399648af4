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

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pivotdt/analysis.hpp"
#include "pivotdt/baselines.hpp"
#include "pivotdt/checkpoint.hpp"
#include "pivotdt/config.hpp"
#include "pivotdt/datagen.hpp"
#include "pivotdt/errors.hpp"
#include "pivotdt/inference.hpp"
#include "pivotdt/io.hpp"
#include "pivotdt/parallel.hpp"
#include "pivotdt/trainer.hpp"

namespace {

using namespace pivotdt;

using Apply = std::function<void(ExperimentConfig&, const ExperimentConfig&)>;

// Flags are parsed into `flags`; after parsing, only the flags actually given
// are copied over the config file (or the defaults).
struct Command {
  CLI::App* app = nullptr;
  ExperimentConfig flags;
  std::vector<std::pair<CLI::Option*, Apply>> overrides;
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  int workers = 0;

  template <typename T>
  void field(const std::string& name, T ExperimentConfig::*section, auto member, const std::string& help) {
    auto* opt = app->add_option(name, (flags.*section).*member, help)->capture_default_str();
    overrides.emplace_back(opt, [section, member](ExperimentConfig& dst, const ExperimentConfig& src) {
      (dst.*section).*member = (src.*section).*member;
    });
  }

  void custom(CLI::Option* opt, Apply apply) { overrides.emplace_back(opt, std::move(apply)); }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : config_from_json(read_file(config_path));
    for (const auto& [opt, apply] : overrides) {
      if (opt->count() > 0) apply(cfg, flags);
    }
    return cfg;
  }
};

Command& make_command(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds, const std::string& name,
                      const std::string& help) {
  cmds.push_back(std::make_unique<Command>());
  Command& c = *cmds.back();
  c.app = root.add_subcommand(name, help);
  c.app->add_option("--config", c.config_path, "JSON experiment config; flags override its fields");
  c.seed_opt = c.app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  c.app->add_option("--workers", c.workers, "Worker threads (0: PIVOT_DT_WORKERS or all cores)")
      ->capture_default_str();
  return c;
}

void add_reward_flags(Command& c) {
  c.field("--c-step", &ExperimentConfig::reward, &RewardConfig::c_step, "Per-step penalty");
  c.field("--c-diag", &ExperimentConfig::reward, &RewardConfig::c_diag, "Bonus for reaching diagonal form");
  c.field("--max-steps", &ExperimentConfig::reward, &RewardConfig::max_steps, "Episode step cap");
  c.field("--scale", &ExperimentConfig::reward, &RewardConfig::scale, "Scale matrices by their largest entry");
  static double tau = ZeroTolerance::kDefault;
  auto* opt = c.app->add_option("--tau-zero", tau, "Zero tolerance for off-diagonal entries")->capture_default_str();
  c.custom(opt, [](ExperimentConfig& dst, const ExperimentConfig&) { dst.reward.tol = ZeroTolerance(tau); });
}

void add_mcts_flags(Command& c) {
  auto* pl = c.app->add_option("--playouts", c.flags.dataset.mcts.playouts, "MCTS playouts per matrix")
                 ->capture_default_str();
  c.custom(pl, [](ExperimentConfig& d, const ExperimentConfig& s) { d.dataset.mcts.playouts = s.dataset.mcts.playouts; });
  auto* ex = c.app->add_option("--exploration", c.flags.dataset.mcts.exploration, "UCT exploration constant")
                 ->capture_default_str();
  c.custom(ex, [](ExperimentConfig& d, const ExperimentConfig& s) {
    d.dataset.mcts.exploration = s.dataset.mcts.exploration;
  });
  static std::string rollout = to_string(MctsConfig{}.rollout);
  auto* ro = c.app->add_option("--rollout", rollout, "MCTS rollout policy")
                 ->check(CLI::IsMember({"uniform", "max-element-mix"}))
                 ->capture_default_str();
  c.custom(ro, [](ExperimentConfig& d, const ExperimentConfig&) { d.dataset.mcts.rollout = rollout_from_string(rollout); });
  auto* gp = c.app->add_option("--greedy-prob", c.flags.dataset.mcts.greedy_prob,
                               "Max-element probability in max-element-mix rollouts")
                 ->capture_default_str();
  c.custom(gp, [](ExperimentConfig& d, const ExperimentConfig& s) {
    d.dataset.mcts.greedy_prob = s.dataset.mcts.greedy_prob;
  });
  c.field("--top-k", &ExperimentConfig::dataset, &DatasetConfig::top_k, "Sequences kept per matrix");
}

void add_model_flags(Command& c) {
  c.field("--n", &ExperimentConfig::model, &DTConfig::n, "Matrix dimension");
  c.field("--n-blocks", &ExperimentConfig::model, &DTConfig::n_blocks, "Transformer blocks");
  c.field("--n-heads", &ExperimentConfig::model, &DTConfig::n_heads, "Attention heads");
  c.field("--context-timesteps", &ExperimentConfig::model, &DTConfig::context_timesteps, "Context length in timesteps");
  c.field("--embed-dim", &ExperimentConfig::model, &DTConfig::embed_dim, "Embedding width");
  c.field("--dropout", &ExperimentConfig::model, &DTConfig::dropout, "Dropout probability");
  c.field("--psi", &ExperimentConfig::model, &DTConfig::psi, "Cross-entropy weight in the loss");
  c.field("--learning-rate", &ExperimentConfig::model, &DTConfig::learning_rate, "Learning rate");
  c.field("--batch-size", &ExperimentConfig::model, &DTConfig::batch_size, "Episodes per gradient step");
  c.field("--weight-decay", &ExperimentConfig::model, &DTConfig::weight_decay, "AdamW weight decay");
  c.field("--grad-clip", &ExperimentConfig::model, &DTConfig::grad_clip, "Global gradient-norm clip (<= 0: off)");
  static std::string optimizer = to_string(DTConfig{}.optimizer);
  auto* op = c.app->add_option("--optimizer", optimizer, "Optimizer")
                 ->check(CLI::IsMember({"adamw", "sgd"}))
                 ->capture_default_str();
  c.custom(op, [](ExperimentConfig& d, const ExperimentConfig&) { d.model.optimizer = optimizer_from_string(optimizer); });
  static std::string features = to_string(DTConfig{}.state_features);
  auto* sf = c.app->add_option("--state-features", features, "State token input")
                 ->check(CLI::IsMember({"scaled", "offdiag_normalized"}))
                 ->capture_default_str();
  c.custom(sf, [](ExperimentConfig& d, const ExperimentConfig&) {
    d.model.state_features = state_features_from_string(features);
  });
}

void add_infer_flags(Command& c) {
  c.field("--rollouts", &ExperimentConfig::infer, &InferenceConfig::n_rollouts, "Rollouts per matrix");
  c.field("--epsilon", &ExperimentConfig::infer, &InferenceConfig::epsilon_infer,
          "Probability of the greedy action after a low reward");
  c.field("--reward-threshold", &ExperimentConfig::infer, &InferenceConfig::reward_threshold,
          "Rewards at or below this trigger exploration");
  c.field("--target-return", &ExperimentConfig::infer, &InferenceConfig::target_return, "Initial return-to-go");
  c.field("--infer-max-steps", &ExperimentConfig::infer, &InferenceConfig::max_steps, "Rollout step cap");
}

MatrixDataset load_dataset(const std::string& matrices, const std::string& sequences, const RewardConfig& reward) {
  std::istringstream m(read_file(matrices));
  MatrixDataset ds = read_matrices_jsonl(m);
  if (!sequences.empty()) {
    std::istringstream s(read_file(sequences));
    read_sequences_jsonl(s, ds, reward);
  }
  return ds;
}

std::vector<const DatasetEntry*> select_split(const MatrixDataset& ds, const std::string& split) {
  if (split == "all") {
    std::vector<const DatasetEntry*> out;
    for (const auto& e : ds.matrices) out.push_back(&e);
    return out;
  }
  return ds.entries(split_from_string(split));
}

void write_eval_outputs(const EvalReport& rep, const std::string& out, const std::string& summary,
                        const std::string& episodes) {
  std::ostringstream csv;
  write_eval_csv(csv, rep.rows);
  write_file(out, csv.str());
  if (!summary.empty()) write_file(summary, eval_summary_json(rep.summary) + "\n");
  if (!episodes.empty()) {
    std::vector<EpisodeRecord> recs = rep.dt_episodes;
    for (auto r : rep.all_episodes) {
      r.solver = "dt_rollout";
      recs.push_back(std::move(r));
    }
    std::ostringstream e;
    write_episodes_jsonl(e, recs);
    write_file(episodes, e.str());
  }
  std::cout << eval_summary_json(rep.summary) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned pivot selection for the Jacobi eigenvalue algorithm"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> cmds;
  std::function<void()> action;

  // gen-matrices
  {
    Command& c = make_command(app, cmds, "gen-matrices", "Sample random symmetric matrices and split them");
    c.field("--n", &ExperimentConfig::dataset, &DatasetConfig::n, "Matrix dimension");
    c.field("--count", &ExperimentConfig::dataset, &DatasetConfig::count, "Number of matrices");
    c.field("--train-fraction", &ExperimentConfig::dataset, &DatasetConfig::train_fraction, "Train split fraction");
    static std::string dist = "uniform";
    auto* d = c.app->add_option("--distribution", dist, "Entry distribution")
                  ->check(CLI::IsMember({"uniform", "gaussian"}))
                  ->capture_default_str();
    c.custom(d, [](ExperimentConfig& dst, const ExperimentConfig&) {
      dst.dataset.dist.kind = distribution_kind_from_string(dist);
    });
    auto* lo = c.app->add_option("--low", c.flags.dataset.dist.low, "Uniform lower bound")->capture_default_str();
    c.custom(lo, [](ExperimentConfig& dst, const ExperimentConfig& s) { dst.dataset.dist.low = s.dataset.dist.low; });
    auto* hi = c.app->add_option("--high", c.flags.dataset.dist.high, "Uniform upper bound")->capture_default_str();
    c.custom(hi, [](ExperimentConfig& dst, const ExperimentConfig& s) { dst.dataset.dist.high = s.dataset.dist.high; });
    auto* sd = c.app->add_option("--stddev", c.flags.dataset.dist.stddev, "Gaussian standard deviation")
                   ->capture_default_str();
    c.custom(sd, [](ExperimentConfig& dst, const ExperimentConfig& s) {
      dst.dataset.dist.stddev = s.dataset.dist.stddev;
    });
    auto* de = c.app->add_option("--density", c.flags.dataset.dist.density, "Fraction of nonzero off-diagonal entries")
                   ->capture_default_str();
    c.custom(de, [](ExperimentConfig& dst, const ExperimentConfig& s) {
      dst.dataset.dist.density = s.dataset.dist.density;
    });
    static std::string out = "matrices.jsonl";
    c.app->add_option("--out", out, "Output matrices.jsonl")->capture_default_str();
    c.app->callback([&c, &action] {
      action = [&c] {
        ExperimentConfig cfg = c.resolve();
        if (c.seed_opt->count()) cfg.dataset.seed = c.seed;
        cfg.dataset.validate();
        const MatrixDataset ds = generate_matrices(cfg.dataset.n, cfg.dataset.count, cfg.dataset.dist,
                                                   cfg.dataset.train_fraction, cfg.dataset.seed);
        std::ostringstream s;
        write_matrices_jsonl(s, ds);
        write_file(out, s.str());
        std::cout << "wrote " << ds.matrices.size() << " matrices to " << out << "\n";
      };
    });
  }

  // gen-sequences
  {
    Command& c = make_command(app, cmds, "gen-sequences", "Search pivot sequences with MCTS for every matrix");
    add_mcts_flags(c);
    add_reward_flags(c);
    static std::string matrices = "matrices.jsonl", out = "sequences.jsonl";
    c.app->add_option("--matrices", matrices, "Input matrices.jsonl")->capture_default_str();
    c.app->add_option("--out", out, "Output sequences.jsonl")->capture_default_str();
    c.app->callback([&c, &action] {
      action = [&c] {
        ExperimentConfig cfg = c.resolve();
        if (c.seed_opt->count()) cfg.dataset.seed = c.seed;
        cfg.dataset.mcts.validate();
        cfg.reward.validate();
        MatrixDataset ds = load_dataset(matrices, "", cfg.reward);
        generate_pools(ds, cfg.dataset.mcts, cfg.reward, cfg.dataset.top_k, cfg.dataset.seed,
                       resolve_workers(c.workers));
        std::ostringstream s;
        write_sequences_jsonl(s, ds);
        write_file(out, s.str());
        std::cout << "wrote pools for " << ds.pools.size() << " matrices to " << out << "\n";
      };
    });
  }

  // train
  {
    Command& c = make_command(app, cmds, "train", "Train the decision transformer");
    add_model_flags(c);
    add_reward_flags(c);
    add_infer_flags(c);
    c.field("--total-steps", &ExperimentConfig::train, &TrainConfig::total_steps, "Gradient steps");
    c.field("--eval-every", &ExperimentConfig::train, &TrainConfig::eval_every, "Steps between progress evaluations");
    c.field("--eval-matrices", &ExperimentConfig::train, &TrainConfig::eval_matrices, "Test matrices per evaluation");
    c.field("--eval-rollouts", &ExperimentConfig::train, &TrainConfig::eval_rollouts, "Rollouts per evaluation matrix");
    c.field("--epsilon-train", &ExperimentConfig::train, &TrainConfig::epsilon_train,
            "Probability of a uniform pool draw instead of the optimal sequence");
    static std::string matrices = "matrices.jsonl", sequences = "sequences.jsonl", out = "model.ckpt",
                       metrics = "metrics.jsonl";
    c.app->add_option("--matrices", matrices, "Input matrices.jsonl")->capture_default_str();
    c.app->add_option("--sequences", sequences, "Input sequences.jsonl")->capture_default_str();
    c.app->add_option("--out", out, "Output checkpoint")->capture_default_str();
    c.app->add_option("--metrics", metrics, "Output metrics JSON Lines")->capture_default_str();
    c.app->callback([&c, &action] {
      action = [&c] {
        ExperimentConfig cfg = c.resolve();
        if (c.seed_opt->count()) cfg.train.seed = c.seed;
        cfg.train.workers = resolve_workers(c.workers);
        const MatrixDataset ds = load_dataset(matrices, sequences, cfg.reward);
        std::ofstream log(metrics, std::ios::binary | std::ios::trunc);
        if (!log) throw std::runtime_error(metrics + ": cannot open for writing");
        const TrainResult r = train(ds, cfg.model, cfg.train, cfg.reward, cfg.infer, [&](const MetricsEntry& m) {
          log << metrics_to_json_line(m) << "\n";
          log.flush();
          if (m.eval_mean_steps) {
            std::cerr << "step " << m.step << " loss " << m.loss << " eval_mean_steps " << *m.eval_mean_steps << "\n";
          }
        });
        save_checkpoint(out, r.model, dataset_fingerprint(ds), cfg.train.seed);
        std::cout << "trained " << r.metrics.size() << " steps; checkpoint " << out << "\n";
      };
    });
  }

  // baseline
  {
    Command& c = make_command(app, cmds, "baseline", "Run classical pivot strategies");
    add_reward_flags(c);
    static std::string matrices = "matrices.jsonl", out = "results.csv", episodes, split = "test";
    static std::vector<std::string> solvers{"max_element"};
    c.app->add_option("--matrices", matrices, "Input matrices.jsonl")->capture_default_str();
    c.app->add_option("--solver", solvers, "Solvers to run")
        ->check(CLI::IsMember({"max_element", "random", "cyclic"}))
        ->capture_default_str();
    c.app->add_option("--split", split, "Matrices to use")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    c.app->add_option("--out", out, "Output results CSV")->capture_default_str();
    c.app->add_option("--episodes", episodes, "Optional episodes JSON Lines");
    c.app->callback([&c, &action] {
      action = [&c] {
        ExperimentConfig cfg = c.resolve();
        cfg.reward.validate();
        const MatrixDataset ds = load_dataset(matrices, "", cfg.reward);
        std::vector<SolverRow> rows;
        std::vector<EpisodeRecord> recs;
        for (const auto* e : select_split(ds, split)) {
          for (const auto& s : solvers) {
            EpisodeResult r;
            if (s == "max_element") {
              r = max_element_solve(e->matrix, cfg.reward);
            } else if (s == "cyclic") {
              r = cyclic_solve(e->matrix, cfg.reward);
            } else {
              Rng rng = make_rng(c.seed, {stream::kBaseline, static_cast<std::uint64_t>(e->id)});
              r = random_pivot_solve(e->matrix, cfg.reward, rng);
            }
            rows.push_back({e->id, s, r.steps, r.terminated});
            recs.push_back({e->id, s, r});
          }
        }
        std::ostringstream csv;
        write_results_csv(csv, rows);
        write_file(out, csv.str());
        if (!episodes.empty()) {
          std::ostringstream j;
          write_episodes_jsonl(j, recs);
          write_file(episodes, j.str());
        }
        std::cout << "wrote " << rows.size() << " results to " << out << "\n";
      };
    });
  }

  // infer and transfer-eval share their flags.
  for (const bool transfer : {false, true}) {
    Command& c = make_command(app, cmds, transfer ? "transfer-eval" : "infer",
                              transfer ? "Evaluate a trained model on smaller matrices padded to its size"
                                       : "Return-conditioned rollouts of a trained model");
    add_infer_flags(c);
    add_reward_flags(c);
    struct Paths {
      std::string checkpoint = "model.ckpt", matrices = "matrices.jsonl", split, out = "eval.csv", summary, episodes;
    };
    auto paths = std::make_shared<Paths>();
    paths->split = transfer ? "all" : "test";
    c.app->add_option("--checkpoint", paths->checkpoint, "Trained checkpoint")->capture_default_str();
    c.app->add_option("--matrices", paths->matrices, "Input matrices.jsonl")->capture_default_str();
    c.app->add_option("--split", paths->split, "Matrices to use")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    c.app->add_option("--out", paths->out, "Output evaluation CSV")->capture_default_str();
    c.app->add_option("--summary", paths->summary, "Optional JSON summary");
    c.app->add_option("--episodes", paths->episodes, "Optional episodes JSON Lines (best, then every rollout)");
    c.app->callback([&c, &action, paths, transfer] {
      action = [&c, paths, transfer] {
        ExperimentConfig cfg = c.resolve();
        if (c.seed_opt->count()) cfg.infer.seed = c.seed;
        const LoadedCheckpoint ck = load_checkpoint(paths->checkpoint);
        const MatrixDataset ds = load_dataset(paths->matrices, "", cfg.reward);
        const auto entries = select_split(ds, paths->split);
        if (entries.empty()) throw ValidationError("no matrices in split " + paths->split);
        const int workers = resolve_workers(c.workers);
        if (transfer) {
          const TransferReport t = transfer_eval(ck.model, entries, cfg.infer, cfg.reward, workers);
          std::cout << "transfer " << t.target_n << "x" << t.target_n << " -> n=" << t.source_n << "\n";
          write_eval_outputs(t.report, paths->out, paths->summary, paths->episodes);
        } else {
          for (const auto* e : entries) {
            if (e->matrix.dim() != ck.model.config().n) {
              throw DimensionError("matrix " + std::to_string(e->id) + " does not match the model size; use transfer-eval");
            }
          }
          write_eval_outputs(evaluate(ck.model, entries, cfg.infer, cfg.reward, workers), paths->out, paths->summary,
                             paths->episodes);
        }
      };
    });
  }

  // analyze
  {
    Command& c = make_command(app, cmds, "analyze", "Solver comparison, pivot heatmaps and transition graphs");
    static std::vector<std::string> results;
    static std::string episodes, solver = "dt", out_dir = "reports";
    static int n = 5, steps = 10, top_n = 5;
    static bool all_rollouts = false;
    c.app->add_option("--results", results, "Results CSVs (matrix_id,solver,steps,terminated or evaluation CSVs)");
    c.app->add_option("--episodes", episodes, "Episodes JSON Lines for heatmaps and transitions");
    c.app->add_option("--solver", solver, "Solver whose episodes are analysed")->capture_default_str();
    c.app->add_flag("--all-rollouts", all_rollouts, "Use every rollout instead of the best per matrix");
    c.app->add_option("--n", n, "Matrix dimension of the episodes")->capture_default_str();
    c.app->add_option("--steps", steps, "Heatmap steps")->capture_default_str();
    c.app->add_option("--top-n", top_n, "Sequences in the transition graph")->capture_default_str();
    c.app->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    c.app->callback([&c, &action] {
      action = [&c] {
        c.resolve();
        std::vector<SolverRow> rows;
        for (const auto& path : results) {
          const std::string text = read_file(path);
          if (text.rfind("matrix_id,dt_steps,", 0) == 0) {
            // Evaluation CSV: one dt and one max_element row per matrix.
            std::istringstream in(text);
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
              if (line.empty()) continue;
              int id = 0, dt = 0, me = 0, sv = 0;
              char comma = 0;
              std::istringstream ls(line);
              if (!(ls >> id >> comma >> dt >> comma >> me >> comma >> sv)) {
                throw FormatError(path + ": malformed row '" + line + "'");
              }
              rows.push_back({id, "dt", dt, true});
              rows.push_back({id, "max_element", me, true});
            }
          } else {
            std::istringstream in(text);
            const auto r = read_results_csv(in);
            rows.insert(rows.end(), r.begin(), r.end());
          }
        }
        std::vector<EpisodeResult> eps;
        if (!episodes.empty()) {
          std::istringstream in(read_file(episodes));
          const std::string want = all_rollouts ? solver + "_rollout" : solver;
          for (const auto& r : read_episodes_jsonl(in)) {
            if (r.solver == want) eps.push_back(r.result);
          }
        }
        const Comparison cmp = compare_solvers(rows);
        export_reports(out_dir, cmp, pivot_heatmaps(eps, n, steps), transition_graph(eps, top_n));
        std::cout << "wrote reports to " << out_dir << "\n";
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
