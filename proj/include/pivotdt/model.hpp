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

// Causal decision transformer over interleaved (return-to-go, state, action)
// tokens, with hand-written reverse-mode gradients.
//
// Token layout for timestep t of a window: [rg_t, S_t, a_t]. The action head
// reads the final hidden state at S_t (so it never sees a_t); the
// return-to-go head reads it at a_t and predicts rg_{t+1}.

#ifndef PIVOTDT_MODEL_HPP_
#define PIVOTDT_MODEL_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pivotdt/env.hpp"
#include "pivotdt/rng.hpp"

namespace pivotdt {

struct DTConfig {
  enum class Optimizer { kAdamW, kSgd };
  // kScaled feeds the state as stored. kOffdiagNormalized divides the off-diagonal
  // entries by the current largest one so late-episode states keep their contrast.
  enum class StateFeatures { kScaled, kOffdiagNormalized };

  int n = 5;  // matrix dimension
  int n_blocks = 5;
  int n_heads = 8;
  int context_timesteps = 45;
  int embed_dim = 256;
  double dropout = 0.1;
  double psi = 0.5;
  double learning_rate = 6.6e-5;
  int batch_size = 64;
  Optimizer optimizer = Optimizer::kAdamW;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global-norm clip; <= 0 disables
  StateFeatures state_features = StateFeatures::kOffdiagNormalized;

  int state_dim() const { return n * n; }
  int action_count() const { return n * (n - 1) / 2; }
  void validate() const;

  friend bool operator==(const DTConfig&, const DTConfig&) = default;
};

std::string to_string(DTConfig::Optimizer o);
DTConfig::Optimizer optimizer_from_string(const std::string& s);

// Raw token inputs for one episode window, padded to context_timesteps.
// Positions t >= length carry mask 0.
struct EpisodeTokens {
  int length = 0;
  std::vector<double> rg;          // [K]
  std::vector<double> states;      // [K * n^2], row-major flattened matrices
  std::vector<int> actions;        // [K]
  std::vector<std::uint8_t> mask;  // [K]
  std::vector<int> timesteps;      // [K], position within the window
  std::vector<double> rg_target;   // [K], rg_{t+1} (0 after the last step)
};

struct TokenBatch {
  int context_timesteps = 0;
  std::vector<EpisodeTokens> episodes;

  int unmasked() const;
};

// Builds the token window for a trajectory. Episodes longer than the context
// keep their most recent context_timesteps steps.
std::string to_string(DTConfig::StateFeatures f);
DTConfig::StateFeatures state_features_from_string(const std::string& s);

// Writes the n*n state token input for one matrix.
void write_state_features(const SymMatrix& state, const DTConfig& cfg, double* out);

EpisodeTokens embed_tokens(const Trajectory& traj, const DTConfig& cfg);

struct ParamInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  bool decay = false;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Named tensors laid out in one flat buffer, in declaration order.
class ParamLayout {
 public:
  explicit ParamLayout(const DTConfig& cfg);

  const std::vector<ParamInfo>& params() const { return params_; }
  const ParamInfo& at(const std::string& name) const;
  std::size_t total() const { return total_; }

 private:
  void add(const std::string& name, int rows, int cols, bool decay);

  std::vector<ParamInfo> params_;
  std::size_t total_ = 0;
};

enum class Mode { kTrain, kEval };

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Flat parameter / gradient storage. The aligned allocator fixes the SIMD
// alignment of every tensor, which keeps Eigen reductions bit-reproducible.
template <typename T>
using ParamVec = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
struct ForwardOutput {
  RowMat<T> action_logits;  // [length, action_count]
  std::vector<T> r2g_pred;  // [length]
};

template <typename T>
struct ForwardCache;

struct LossBreakdown {
  double loss = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  int timesteps = 0;
};

template <typename T>
class DecisionTransformer {
 public:
  explicit DecisionTransformer(const DTConfig& cfg);

  // Truncated normal (std 0.02, cut at 2 std), zero biases, unit LayerNorm
  // gains; residual output projections scaled by 1/sqrt(2 n_blocks).
  void init(Rng& rng);

  const DTConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  ParamVec<T>& params() { return params_; }
  const ParamVec<T>& params() const { return params_; }

  // Dropout is applied only in train mode and then needs rng. Pass a cache to
  // keep activations for backward().
  ForwardOutput<T> forward(const EpisodeTokens& ep, Mode mode, Rng* rng = nullptr,
                           ForwardCache<T>* cache = nullptr) const;

  // Accumulates parameter gradients into grad (same layout as params()).
  void backward(const EpisodeTokens& ep, const ForwardCache<T>& cache, const RowMat<T>& dlogits,
                const std::vector<T>& dr2g, ParamVec<T>& grad) const;

  // Embedded input tokens [3 * length, embed_dim] before the embedding LayerNorm.
  RowMat<T> embed(const EpisodeTokens& ep) const;

 private:
  DTConfig cfg_;
  ParamLayout layout_;
  ParamVec<T> params_;
};

// psi * CE + (1 - psi) * MSE, both averaged over every unmasked timestep of the
// batch. Writes d loss / d logits and d loss / d r2g_pred when grads are given.
template <typename T>
LossBreakdown composite_loss(const std::vector<ForwardOutput<T>>& outputs, const TokenBatch& batch, double psi,
                             std::vector<RowMat<T>>* dlogits = nullptr, std::vector<std::vector<T>>* dr2g = nullptr);

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(const DTConfig& cfg);

  // Clips the global gradient norm, then applies AdamW or plain SGD.
  // Returns the pre-clip norm.
  double step(const ParamLayout& layout, ParamVec<T>& params, const ParamVec<T>& grad);

  long long steps() const { return t_; }

 private:
  DTConfig cfg_;
  ParamVec<T> m_, v_;
  long long t_ = 0;
};

// Forward, composite loss and backward over a batch; gradients are reduced in a
// fixed order so the result does not depend on the worker count.
template <typename T>
LossBreakdown loss_and_gradient(const DecisionTransformer<T>& model, const TokenBatch& batch, Mode mode,
                                std::uint64_t dropout_seed, ParamVec<T>* grad, int workers = 1);

// Action probabilities at the last real timestep of the window.
template <typename T>
std::vector<double> policy_probabilities(const DecisionTransformer<T>& model, const EpisodeTokens& ep);

}  // namespace pivotdt

#endif  // PIVOTDT_MODEL_HPP_
