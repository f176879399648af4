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

#include "pivotdt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pivotdt/parallel.hpp"

namespace pivotdt {

void DTConfig::validate() const {
  if (n < 2) throw ConfigError("model.n must be at least 2");
  if (n_blocks < 1) throw ConfigError("model.n_blocks must be at least 1");
  if (n_heads < 1) throw ConfigError("model.n_heads must be at least 1");
  if (embed_dim < 1 || embed_dim % n_heads != 0) throw ConfigError("model.embed_dim must be divisible by n_heads");
  if (context_timesteps < 1) throw ConfigError("model.context_timesteps must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must be in [0, 1)");
  if (!(psi >= 0.0 && psi <= 1.0)) throw ConfigError("model.psi must be in [0, 1]");
  if (!(learning_rate >= 0.0)) throw ConfigError("model.learning_rate must be non-negative");
  if (batch_size < 1) throw ConfigError("model.batch_size must be at least 1");
}

std::string to_string(DTConfig::Optimizer o) { return o == DTConfig::Optimizer::kAdamW ? "adamw" : "sgd"; }

DTConfig::Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adamw") return DTConfig::Optimizer::kAdamW;
  if (s == "sgd") return DTConfig::Optimizer::kSgd;
  throw ConfigError("unknown optimizer '" + s + "'");
}

std::string to_string(DTConfig::StateFeatures f) {
  return f == DTConfig::StateFeatures::kScaled ? "scaled" : "offdiag_normalized";
}

DTConfig::StateFeatures state_features_from_string(const std::string& s) {
  if (s == "scaled") return DTConfig::StateFeatures::kScaled;
  if (s == "offdiag_normalized") return DTConfig::StateFeatures::kOffdiagNormalized;
  throw ConfigError("unknown state feature mode '" + s + "'");
}

void write_state_features(const SymMatrix& state, const DTConfig& cfg, double* out) {
  const int n = state.dim();
  const auto v = state.values();
  std::copy(v.begin(), v.end(), out);
  if (cfg.state_features != DTConfig::StateFeatures::kOffdiagNormalized) return;
  double big = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) big = std::max(big, std::abs(out[i * n + j]));
  if (big == 0.0) return;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) out[i * n + j] /= big;
}

int TokenBatch::unmasked() const {
  int total = 0;
  for (const auto& e : episodes) total += e.length;
  return total;
}

EpisodeTokens embed_tokens(const Trajectory& traj, const DTConfig& cfg) {
  const int k = cfg.context_timesteps;
  const int sd = cfg.state_dim();
  const int steps = traj.length();
  const int first = std::max(0, steps - k);
  EpisodeTokens ep;
  ep.length = steps - first;
  ep.rg.assign(k, 0.0);
  ep.states.assign(static_cast<std::size_t>(k) * sd, 0.0);
  ep.actions.assign(k, 0);
  ep.mask.assign(k, 0);
  ep.timesteps.resize(k);
  ep.rg_target.assign(k, 0.0);
  for (int t = 0; t < k; ++t) ep.timesteps[t] = t;
  for (int t = 0; t < ep.length; ++t) {
    const auto& s = traj.steps[static_cast<std::size_t>(first + t)];
    if (s.state.dim() * s.state.dim() != sd) {
      throw ConfigError("trajectory matrices are " + std::to_string(s.state.dim()) + "x" +
                        std::to_string(s.state.dim()) + " but the model expects n=" + std::to_string(cfg.n));
    }
    if (s.action.value < 0 || s.action.value >= cfg.action_count()) {
      throw ConfigError("action " + std::to_string(s.action.value) + " outside the model's action space");
    }
    ep.rg[t] = static_cast<double>(s.r2g);
    write_state_features(s.state, cfg, ep.states.data() + static_cast<std::ptrdiff_t>(t) * sd);
    ep.actions[t] = s.action.value;
    ep.mask[t] = 1;
    ep.rg_target[t] = static_cast<double>(s.r2g - static_cast<Return>(s.reward));
  }
  return ep;
}

ParamLayout::ParamLayout(const DTConfig& cfg) {
  cfg.validate();
  const int d = cfg.embed_dim;
  add("embed.state.w", cfg.state_dim(), d, true);
  add("embed.state.b", 1, d, false);
  add("embed.action.w", cfg.action_count(), d, true);
  add("embed.action.b", 1, d, false);
  add("embed.rg.w", 1, d, true);
  add("embed.rg.b", 1, d, false);
  add("embed.pos", cfg.context_timesteps, d, false);
  add("embed.ln.g", 1, d, false);
  add("embed.ln.b", 1, d, false);
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    add(p + "ln1.g", 1, d, false);
    add(p + "ln1.b", 1, d, false);
    add(p + "attn.qkv.w", d, 3 * d, true);
    add(p + "attn.qkv.b", 1, 3 * d, false);
    add(p + "attn.proj.w", d, d, true);
    add(p + "attn.proj.b", 1, d, false);
    add(p + "ln2.g", 1, d, false);
    add(p + "ln2.b", 1, d, false);
    add(p + "mlp.fc.w", d, 4 * d, true);
    add(p + "mlp.fc.b", 1, 4 * d, false);
    add(p + "mlp.proj.w", 4 * d, d, true);
    add(p + "mlp.proj.b", 1, d, false);
  }
  add("ln_f.g", 1, d, false);
  add("ln_f.b", 1, d, false);
  add("head.action.w", d, cfg.action_count(), true);
  add("head.action.b", 1, cfg.action_count(), false);
  add("head.rg.w", d, 1, true);
  add("head.rg.b", 1, 1, false);
}

void ParamLayout::add(const std::string& name, int rows, int cols, bool decay) {
  params_.push_back({name, rows, cols, total_, decay});
  total_ += params_.back().size();
}

const ParamInfo& ParamLayout::at(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("no parameter named '" + name + "'");
}

namespace {

constexpr double kLnEps = 1e-5;

template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MMap = Eigen::Map<RowMat<T>>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
CMap<T> view(const ParamVec<T>& buf, const ParamInfo& p) {
  return CMap<T>(buf.data() + p.offset, p.rows, p.cols);
}

template <typename T>
MMap<T> view(ParamVec<T>& buf, const ParamInfo& p) {
  return MMap<T>(buf.data() + p.offset, p.rows, p.cols);
}

struct BlockIndex {
  const ParamInfo *ln1_g, *ln1_b, *qkv_w, *qkv_b, *proj_w, *proj_b, *ln2_g, *ln2_b, *fc_w, *fc_b, *mp_w, *mp_b;
};

struct ModelIndex {
  const ParamInfo *state_w, *state_b, *action_w, *action_b, *rg_w, *rg_b, *pos, *eln_g, *eln_b;
  std::vector<BlockIndex> blocks;
  const ParamInfo *lnf_g, *lnf_b, *ha_w, *ha_b, *hr_w, *hr_b;

  ModelIndex(const ParamLayout& l, int n_blocks) {
    state_w = &l.at("embed.state.w");
    state_b = &l.at("embed.state.b");
    action_w = &l.at("embed.action.w");
    action_b = &l.at("embed.action.b");
    rg_w = &l.at("embed.rg.w");
    rg_b = &l.at("embed.rg.b");
    pos = &l.at("embed.pos");
    eln_g = &l.at("embed.ln.g");
    eln_b = &l.at("embed.ln.b");
    for (int b = 0; b < n_blocks; ++b) {
      const std::string p = "blocks." + std::to_string(b) + ".";
      blocks.push_back({&l.at(p + "ln1.g"), &l.at(p + "ln1.b"), &l.at(p + "attn.qkv.w"), &l.at(p + "attn.qkv.b"),
                        &l.at(p + "attn.proj.w"), &l.at(p + "attn.proj.b"), &l.at(p + "ln2.g"), &l.at(p + "ln2.b"),
                        &l.at(p + "mlp.fc.w"), &l.at(p + "mlp.fc.b"), &l.at(p + "mlp.proj.w"),
                        &l.at(p + "mlp.proj.b")});
    }
    lnf_g = &l.at("ln_f.g");
    lnf_b = &l.at("ln_f.b");
    ha_w = &l.at("head.action.w");
    ha_b = &l.at("head.action.b");
    hr_w = &l.at("head.rg.w");
    hr_b = &l.at("head.rg.b");
  }
};

template <typename T>
struct LnCache {
  RowMat<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
RowMat<T> layer_norm(const RowMat<T>& x, const CMap<T>& g, const CMap<T>& b, LnCache<T>* c) {
  const Eigen::Index rows = x.rows();
  const T inv_d = T(1) / static_cast<T>(x.cols());
  RowMat<T> xhat(rows, x.cols());
  std::vector<T> rstd(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).sum() * inv_d;
    const auto centered = x.row(r).array() - mean;
    const T var = centered.square().sum() * inv_d;
    const T rs = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    xhat.row(r) = centered * rs;
    rstd[static_cast<std::size_t>(r)] = rs;
  }
  RowMat<T> y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (c) {
    c->xhat = std::move(xhat);
    c->rstd = std::move(rstd);
  }
  return y;
}

template <typename T>
RowMat<T> layer_norm_backward(const RowMat<T>& dy, const LnCache<T>& c, const CMap<T>& g, MMap<T> dg, MMap<T> db) {
  dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  RowMat<T> dxhat = dy.array().rowwise() * g.row(0).array();
  const T inv_d = T(1) / static_cast<T>(dy.cols());
  RowMat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T m1 = dxhat.row(r).sum() * inv_d;
    const T m2 = (dxhat.row(r).array() * c.xhat.row(r).array()).sum() * inv_d;
    dx.row(r) = c.rstd[static_cast<std::size_t>(r)] *
                (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2).matrix();
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  const T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  return T(0.5) * x * (T(1) + std::tanh(k * (x + static_cast<T>(0.044715) * x * x * x)));
}

template <typename T>
T gelu_grad(T x) {
  const T k = static_cast<T>(0.7978845608028654);
  const T u = k * (x + static_cast<T>(0.044715) * x * x * x);
  const T th = std::tanh(u);
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * k * (T(1) + static_cast<T>(3 * 0.044715) * x * x);
}

// Inverted-dropout mask: 0 or 1/(1-p).
template <typename T>
RowMat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  RowMat<T> m(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) < p ? T(0) : keep;
  return m;
}

template <typename T>
void check_finite(const RowMat<T>& x, const std::string& where) {
  if (!x.allFinite()) throw NumericError("non-finite activations in " + where);
}

}  // namespace

template <typename T>
struct BlockCache {
  RowMat<T> x_in;
  LnCache<T> ln1;
  RowMat<T> h1;
  RowMat<T> qkv;
  std::vector<RowMat<T>> probs;  // per head [S, S]
  RowMat<T> attn;                // concatenated head outputs [S, d]
  RowMat<T> drop1;
  RowMat<T> x_mid;
  LnCache<T> ln2;
  RowMat<T> h2;
  RowMat<T> fc;
  RowMat<T> act;
  RowMat<T> drop2;
};

template <typename T>
struct ForwardCache {
  LnCache<T> ln_embed;
  RowMat<T> drop_embed;
  std::vector<BlockCache<T>> blocks;
  LnCache<T> ln_final;
  RowMat<T> final_hidden;
};

template <typename T>
DecisionTransformer<T>::DecisionTransformer(const DTConfig& cfg)
    : cfg_(cfg), layout_(cfg), params_(layout_.total(), T(0)) {}

template <typename T>
void DecisionTransformer<T>::init(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto trunc_normal = [&](double std) {
    double z;
    do {
      z = normal(rng);
    } while (std::abs(z) > 2.0);
    return static_cast<T>(z * std);
  };
  const double resid_std = 0.02 / std::sqrt(2.0 * cfg_.n_blocks);
  for (const auto& p : layout_.params()) {
    auto v = view(params_, p);
    const std::string& name = p.name;
    const bool is_gain = name.size() > 2 && name.compare(name.size() - 2, 2, ".g") == 0;
    const bool is_bias = name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    if (is_gain) {
      v.setOnes();
    } else if (is_bias) {
      v.setZero();
    } else {
      const bool resid = name.find("attn.proj.w") != std::string::npos || name.find("mlp.proj.w") != std::string::npos;
      const double std = resid ? resid_std : 0.02;
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = trunc_normal(std);
    }
  }
}

template <typename T>
RowMat<T> DecisionTransformer<T>::embed(const EpisodeTokens& ep) const {
  const ModelIndex ix(layout_, cfg_.n_blocks);
  const int d = cfg_.embed_dim;
  const int sd = cfg_.state_dim();
  const int len = ep.length;
  if (len < 0 || len > cfg_.context_timesteps || static_cast<int>(ep.rg.size()) < len ||
      ep.states.size() < static_cast<std::size_t>(len) * sd) {
    throw ConfigError("token window does not match the model configuration");
  }
  const auto pos = view(params_, *ix.pos);
  const auto sw = view(params_, *ix.state_w);
  const auto sb = view(params_, *ix.state_b);
  const auto aw = view(params_, *ix.action_w);
  const auto ab = view(params_, *ix.action_b);
  const auto rw = view(params_, *ix.rg_w);
  const auto rb = view(params_, *ix.rg_b);

  RowMat<T> states(len, sd);
  for (int t = 0; t < len; ++t) {
    for (int c = 0; c < sd; ++c) states(t, c) = static_cast<T>(ep.states[static_cast<std::size_t>(t) * sd + c]);
  }
  const RowMat<T> state_emb = states * sw;
  RowMat<T> x(3 * len, d);
  for (int t = 0; t < len; ++t) {
    const int ts = ep.timesteps[static_cast<std::size_t>(t)];
    const int a = ep.actions[static_cast<std::size_t>(t)];
    if (ts < 0 || ts >= cfg_.context_timesteps) throw ConfigError("timestep index outside the positional table");
    if (a < 0 || a >= cfg_.action_count()) throw ConfigError("action index outside the action space");
    const auto p = pos.row(ts);
    x.row(3 * t) = static_cast<T>(ep.rg[static_cast<std::size_t>(t)]) * rw.row(0) + rb.row(0) + p;
    x.row(3 * t + 1) = state_emb.row(t) + sb.row(0) + p;
    x.row(3 * t + 2) = aw.row(a) + ab.row(0) + p;
  }
  return x;
}

template <typename T>
ForwardOutput<T> DecisionTransformer<T>::forward(const EpisodeTokens& ep, Mode mode, Rng* rng,
                                                 ForwardCache<T>* cache) const {
  const ModelIndex ix(layout_, cfg_.n_blocks);
  const int d = cfg_.embed_dim;
  const int heads = cfg_.n_heads;
  const int dh = d / heads;
  const int len = ep.length;
  const Eigen::Index s = 3 * len;
  const bool drop = mode == Mode::kTrain && cfg_.dropout > 0.0;
  if (drop && rng == nullptr) throw ConfigError("train-mode forward with dropout needs an rng");

  ForwardOutput<T> out;
  out.action_logits.resize(len, cfg_.action_count());
  out.r2g_pred.assign(static_cast<std::size_t>(len), T(0));
  if (len == 0) return out;

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.blocks.resize(static_cast<std::size_t>(cfg_.n_blocks));

  RowMat<T> x = layer_norm(embed(ep), view(params_, *ix.eln_g), view(params_, *ix.eln_b), &c.ln_embed);
  if (drop) {
    c.drop_embed = dropout_mask<T>(s, d, cfg_.dropout, *rng);
    x.array() *= c.drop_embed.array();
  }
  check_finite(x, "embedding");

  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    const BlockIndex& bi = ix.blocks[static_cast<std::size_t>(b)];
    BlockCache<T>& bc = c.blocks[static_cast<std::size_t>(b)];
    bc.x_in = x;
    bc.h1 = layer_norm(x, view(params_, *bi.ln1_g), view(params_, *bi.ln1_b), &bc.ln1);
    bc.qkv = (bc.h1 * view(params_, *bi.qkv_w)).rowwise() + view(params_, *bi.qkv_b).row(0);
    bc.attn.resize(s, d);
    bc.probs.resize(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      const auto q = bc.qkv.middleCols(h * dh, dh);
      const auto k = bc.qkv.middleCols(d + h * dh, dh);
      const auto v = bc.qkv.middleCols(2 * d + h * dh, dh);
      RowMat<T> p = (q * k.transpose()) * scale;
      for (Eigen::Index i = 0; i < s; ++i) {
        const T mx = p.row(i).head(i + 1).maxCoeff();
        T sum = 0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          const T e = std::exp(p(i, j) - mx);
          p(i, j) = e;
          sum += e;
        }
        p.row(i).head(i + 1) /= sum;
        p.row(i).tail(s - i - 1).setZero();
      }
      bc.attn.middleCols(h * dh, dh) = p * v;
      bc.probs[static_cast<std::size_t>(h)] = std::move(p);
    }
    RowMat<T> y = (bc.attn * view(params_, *bi.proj_w)).rowwise() + view(params_, *bi.proj_b).row(0);
    if (drop) {
      bc.drop1 = dropout_mask<T>(s, d, cfg_.dropout, *rng);
      y.array() *= bc.drop1.array();
    }
    bc.x_mid = x + y;
    bc.h2 = layer_norm(bc.x_mid, view(params_, *bi.ln2_g), view(params_, *bi.ln2_b), &bc.ln2);
    bc.fc = (bc.h2 * view(params_, *bi.fc_w)).rowwise() + view(params_, *bi.fc_b).row(0);
    bc.act = bc.fc.unaryExpr([](T v) { return gelu(v); });
    RowMat<T> z = (bc.act * view(params_, *bi.mp_w)).rowwise() + view(params_, *bi.mp_b).row(0);
    if (drop) {
      bc.drop2 = dropout_mask<T>(s, d, cfg_.dropout, *rng);
      z.array() *= bc.drop2.array();
    }
    x = bc.x_mid + z;
    check_finite(x, "block " + std::to_string(b));
  }
  c.final_hidden = layer_norm(x, view(params_, *ix.lnf_g), view(params_, *ix.lnf_b), &c.ln_final);

  RowMat<T> hs(len, d), ha(len, d);
  for (int t = 0; t < len; ++t) {
    hs.row(t) = c.final_hidden.row(3 * t + 1);
    ha.row(t) = c.final_hidden.row(3 * t + 2);
  }
  out.action_logits = (hs * view(params_, *ix.ha_w)).rowwise() + view(params_, *ix.ha_b).row(0);
  const RowMat<T> r = (ha * view(params_, *ix.hr_w)).array() + view(params_, *ix.hr_b)(0, 0);
  for (int t = 0; t < len; ++t) out.r2g_pred[static_cast<std::size_t>(t)] = r(t, 0);
  check_finite(out.action_logits, "action head");
  check_finite(r, "return-to-go head");
  return out;
}

template <typename T>
void DecisionTransformer<T>::backward(const EpisodeTokens& ep, const ForwardCache<T>& c, const RowMat<T>& dlogits,
                                      const std::vector<T>& dr2g, ParamVec<T>& grad) const {
  const ModelIndex ix(layout_, cfg_.n_blocks);
  const int d = cfg_.embed_dim;
  const int heads = cfg_.n_heads;
  const int dh = d / heads;
  const int len = ep.length;
  const Eigen::Index s = 3 * len;
  if (len == 0) return;
  if (grad.size() != params_.size()) grad.assign(params_.size(), T(0));

  // Heads.
  RowMat<T> hs(len, d), ha(len, d);
  for (int t = 0; t < len; ++t) {
    hs.row(t) = c.final_hidden.row(3 * t + 1);
    ha.row(t) = c.final_hidden.row(3 * t + 2);
  }
  Eigen::Matrix<T, Eigen::Dynamic, 1> dr(len);
  for (int t = 0; t < len; ++t) dr(t) = dr2g[static_cast<std::size_t>(t)];
  view(grad, *ix.ha_w) += hs.transpose() * dlogits;
  view(grad, *ix.ha_b).row(0) += dlogits.colwise().sum();
  view(grad, *ix.hr_w).col(0) += ha.transpose() * dr;
  view(grad, *ix.hr_b)(0, 0) += dr.sum();

  RowMat<T> dfinal = RowMat<T>::Zero(s, d);
  const RowMat<T> dhs = dlogits * view(params_, *ix.ha_w).transpose();
  const auto hr = view(params_, *ix.hr_w);
  for (int t = 0; t < len; ++t) {
    dfinal.row(3 * t + 1) = dhs.row(t);
    dfinal.row(3 * t + 2) = dr(t) * hr.col(0).transpose();
  }
  RowMat<T> dx = layer_norm_backward(dfinal, c.ln_final, view(params_, *ix.lnf_g), view(grad, *ix.lnf_g),
                                     view(grad, *ix.lnf_b));

  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (int b = cfg_.n_blocks - 1; b >= 0; --b) {
    const BlockIndex& bi = ix.blocks[static_cast<std::size_t>(b)];
    const BlockCache<T>& bc = c.blocks[static_cast<std::size_t>(b)];

    // MLP branch.
    RowMat<T> dz = dx;
    if (bc.drop2.size() > 0) dz.array() *= bc.drop2.array();
    view(grad, *bi.mp_w) += bc.act.transpose() * dz;
    view(grad, *bi.mp_b).row(0) += dz.colwise().sum();
    RowMat<T> dfc = dz * view(params_, *bi.mp_w).transpose();
    dfc.array() *= bc.fc.unaryExpr([](T v) { return gelu_grad(v); }).array();
    view(grad, *bi.fc_w) += bc.h2.transpose() * dfc;
    view(grad, *bi.fc_b).row(0) += dfc.colwise().sum();
    const RowMat<T> dh2 = dfc * view(params_, *bi.fc_w).transpose();
    RowMat<T> dmid = dx + layer_norm_backward(dh2, bc.ln2, view(params_, *bi.ln2_g), view(grad, *bi.ln2_g),
                                              view(grad, *bi.ln2_b));

    // Attention branch.
    RowMat<T> dy = dmid;
    if (bc.drop1.size() > 0) dy.array() *= bc.drop1.array();
    view(grad, *bi.proj_w) += bc.attn.transpose() * dy;
    view(grad, *bi.proj_b).row(0) += dy.colwise().sum();
    const RowMat<T> dattn = dy * view(params_, *bi.proj_w).transpose();
    RowMat<T> dqkv(s, 3 * d);
    for (int h = 0; h < heads; ++h) {
      const RowMat<T>& p = bc.probs[static_cast<std::size_t>(h)];
      const auto q = bc.qkv.middleCols(h * dh, dh);
      const auto k = bc.qkv.middleCols(d + h * dh, dh);
      const auto v = bc.qkv.middleCols(2 * d + h * dh, dh);
      const auto dout = dattn.middleCols(h * dh, dh);
      RowMat<T> dp = dout * v.transpose();
      dqkv.middleCols(2 * d + h * dh, dh) = p.transpose() * dout;
      // Softmax backward; masked entries have p == 0 and drop out.
      const Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = (dp.array() * p.array()).rowwise().sum();
      RowMat<T> ds = (p.array() * (dp.array().colwise() - rowdot.array())) * scale;
      dqkv.middleCols(h * dh, dh) = ds * k;
      dqkv.middleCols(d + h * dh, dh) = ds.transpose() * q;
    }
    view(grad, *bi.qkv_w) += bc.h1.transpose() * dqkv;
    view(grad, *bi.qkv_b).row(0) += dqkv.colwise().sum();
    const RowMat<T> dh1 = dqkv * view(params_, *bi.qkv_w).transpose();
    dx = dmid + layer_norm_backward(dh1, bc.ln1, view(params_, *bi.ln1_g), view(grad, *bi.ln1_g),
                                    view(grad, *bi.ln1_b));
  }

  if (c.drop_embed.size() > 0) dx.array() *= c.drop_embed.array();
  const RowMat<T> dx0 =
      layer_norm_backward(dx, c.ln_embed, view(params_, *ix.eln_g), view(grad, *ix.eln_g), view(grad, *ix.eln_b));

  const int sd = cfg_.state_dim();
  auto gpos = view(grad, *ix.pos);
  auto grw = view(grad, *ix.rg_w);
  auto grb = view(grad, *ix.rg_b);
  auto gsb = view(grad, *ix.state_b);
  auto gaw = view(grad, *ix.action_w);
  auto gab = view(grad, *ix.action_b);
  RowMat<T> states(len, sd), dstate(len, d);
  for (int t = 0; t < len; ++t) {
    const int ts = ep.timesteps[static_cast<std::size_t>(t)];
    const int a = ep.actions[static_cast<std::size_t>(t)];
    gpos.row(ts) += dx0.row(3 * t) + dx0.row(3 * t + 1) + dx0.row(3 * t + 2);
    grw.row(0) += static_cast<T>(ep.rg[static_cast<std::size_t>(t)]) * dx0.row(3 * t);
    grb.row(0) += dx0.row(3 * t);
    gsb.row(0) += dx0.row(3 * t + 1);
    gaw.row(a) += dx0.row(3 * t + 2);
    gab.row(0) += dx0.row(3 * t + 2);
    dstate.row(t) = dx0.row(3 * t + 1);
    for (int col = 0; col < sd; ++col) states(t, col) = static_cast<T>(ep.states[static_cast<std::size_t>(t) * sd + col]);
  }
  view(grad, *ix.state_w) += states.transpose() * dstate;
}

template <typename T>
LossBreakdown composite_loss(const std::vector<ForwardOutput<T>>& outputs, const TokenBatch& batch, double psi,
                             std::vector<RowMat<T>>* dlogits, std::vector<std::vector<T>>* dr2g) {
  if (outputs.size() != batch.episodes.size()) throw ValidationError("outputs and batch differ in size");
  const int total = batch.unmasked();
  if (total == 0) throw ValidationError("composite_loss: every timestep of the batch is masked");
  LossBreakdown lb;
  lb.timesteps = total;
  if (dlogits) dlogits->resize(outputs.size());
  if (dr2g) dr2g->resize(outputs.size());
  double ce_sum = 0.0, mse_sum = 0.0;
  const double inv = 1.0 / total;
  for (std::size_t e = 0; e < outputs.size(); ++e) {
    const auto& out = outputs[e];
    const auto& ep = batch.episodes[e];
    const Eigen::Index a_count = out.action_logits.cols();
    if (dlogits) (*dlogits)[e] = RowMat<T>::Zero(ep.length, a_count);
    if (dr2g) (*dr2g)[e].assign(static_cast<std::size_t>(ep.length), T(0));
    for (int t = 0; t < ep.length; ++t) {
      if (!ep.mask[static_cast<std::size_t>(t)]) continue;
      const auto row = out.action_logits.row(t);
      const double mx = static_cast<double>(row.maxCoeff());
      double z = 0.0;
      for (Eigen::Index a = 0; a < a_count; ++a) z += std::exp(static_cast<double>(row(a)) - mx);
      const double lse = mx + std::log(z);
      const int target = ep.actions[static_cast<std::size_t>(t)];
      ce_sum += lse - static_cast<double>(row(target));
      const double diff = static_cast<double>(out.r2g_pred[static_cast<std::size_t>(t)]) -
                          ep.rg_target[static_cast<std::size_t>(t)];
      mse_sum += diff * diff;
      if (dlogits) {
        for (Eigen::Index a = 0; a < a_count; ++a) {
          const double pa = std::exp(static_cast<double>(row(a)) - lse);
          (*dlogits)[e](t, a) = static_cast<T>(psi * (pa - (a == target ? 1.0 : 0.0)) * inv);
        }
      }
      if (dr2g) (*dr2g)[e][static_cast<std::size_t>(t)] = static_cast<T>((1.0 - psi) * 2.0 * diff * inv);
    }
  }
  lb.ce = ce_sum * inv;
  lb.mse = mse_sum * inv;
  lb.loss = psi * lb.ce + (1.0 - psi) * lb.mse;
  return lb;
}

template <typename T>
Optimizer<T>::Optimizer(const DTConfig& cfg) : cfg_(cfg) {}

template <typename T>
double Optimizer<T>::step(const ParamLayout& layout, ParamVec<T>& params, const ParamVec<T>& grad) {
  if (grad.size() != params.size()) throw ValidationError("gradient size does not match parameters");
  double norm_sq = 0.0;
  for (T g : grad) norm_sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(norm_sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient");
  const double clip = (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;
  ++t_;
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == DTConfig::Optimizer::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= static_cast<T>(lr * clip * grad[i]);
    return norm;
  }
  if (m_.empty()) {
    m_.assign(params.size(), T(0));
    v_.assign(params.size(), T(0));
  }
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& p : layout.params()) {
    const double decay = p.decay ? lr * cfg_.weight_decay : 0.0;
    for (std::size_t i = p.offset; i < p.offset + p.size(); ++i) {
      const double g = clip * static_cast<double>(grad[i]);
      const double m = b1 * static_cast<double>(m_[i]) + (1.0 - b1) * g;
      const double v = b2 * static_cast<double>(v_[i]) + (1.0 - b2) * g * g;
      m_[i] = static_cast<T>(m);
      v_[i] = static_cast<T>(v);
      double w = static_cast<double>(params[i]);
      w -= decay * w;
      w -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.adam_eps);
      params[i] = static_cast<T>(w);
    }
  }
  return norm;
}

template <typename T>
LossBreakdown loss_and_gradient(const DecisionTransformer<T>& model, const TokenBatch& batch, Mode mode,
                                std::uint64_t dropout_seed, ParamVec<T>* grad, int workers) {
  const int count = static_cast<int>(batch.episodes.size());
  std::vector<ForwardOutput<T>> outputs(static_cast<std::size_t>(count));
  std::vector<ForwardCache<T>> caches(grad ? static_cast<std::size_t>(count) : 0);
  parallel_for(count, workers, [&](int e) {
    Rng rng = make_rng(dropout_seed, {static_cast<std::uint64_t>(e)});
    outputs[static_cast<std::size_t>(e)] = model.forward(batch.episodes[static_cast<std::size_t>(e)], mode, &rng,
                                                         grad ? &caches[static_cast<std::size_t>(e)] : nullptr);
  });
  std::vector<RowMat<T>> dlogits;
  std::vector<std::vector<T>> dr2g;
  const LossBreakdown lb =
      composite_loss(outputs, batch, model.config().psi, grad ? &dlogits : nullptr, grad ? &dr2g : nullptr);
  if (!grad) return lb;

  // Fixed partition into groups; each group accumulates in episode order and
  // groups are summed in order.
  constexpr int kGroups = 8;
  const int groups = std::min(kGroups, count);
  const std::size_t np = model.params().size();
  std::vector<ParamVec<T>> partial(static_cast<std::size_t>(groups));
  parallel_for(groups, workers, [&](int g) {
    auto& acc = partial[static_cast<std::size_t>(g)];
    acc.assign(np, T(0));
    for (int e = g; e < count; e += groups) {
      const auto idx = static_cast<std::size_t>(e);
      model.backward(batch.episodes[idx], caches[idx], dlogits[idx], dr2g[idx], acc);
    }
  });
  grad->assign(np, T(0));
  for (const auto& acc : partial) {
    for (std::size_t i = 0; i < np; ++i) (*grad)[i] += acc[i];
  }
  for (T g : *grad) {
    if (!std::isfinite(static_cast<double>(g))) throw NumericError("non-finite gradient");
  }
  return lb;
}

template <typename T>
std::vector<double> policy_probabilities(const DecisionTransformer<T>& model, const EpisodeTokens& ep) {
  if (ep.length < 1) throw ValidationError("policy query needs at least one timestep");
  const auto out = model.forward(ep, Mode::kEval);
  const auto row = out.action_logits.row(ep.length - 1);
  const double mx = static_cast<double>(row.maxCoeff());
  std::vector<double> p(static_cast<std::size_t>(row.size()));
  double z = 0.0;
  for (Eigen::Index a = 0; a < row.size(); ++a) {
    p[static_cast<std::size_t>(a)] = std::exp(static_cast<double>(row(a)) - mx);
    z += p[static_cast<std::size_t>(a)];
  }
  for (double& v : p) v /= z;
  return p;
}

template class DecisionTransformer<float>;
template class DecisionTransformer<double>;
template class Optimizer<float>;
template class Optimizer<double>;
template LossBreakdown composite_loss<float>(const std::vector<ForwardOutput<float>>&, const TokenBatch&, double,
                                             std::vector<RowMat<float>>*, std::vector<std::vector<float>>*);
template LossBreakdown composite_loss<double>(const std::vector<ForwardOutput<double>>&, const TokenBatch&, double,
                                              std::vector<RowMat<double>>*, std::vector<std::vector<double>>*);
template LossBreakdown loss_and_gradient<float>(const DecisionTransformer<float>&, const TokenBatch&, Mode,
                                                std::uint64_t, ParamVec<float>*, int);
template LossBreakdown loss_and_gradient<double>(const DecisionTransformer<double>&, const TokenBatch&, Mode,
                                                 std::uint64_t, ParamVec<double>*, int);
template std::vector<double> policy_probabilities<float>(const DecisionTransformer<float>&, const EpisodeTokens&);
template std::vector<double> policy_probabilities<double>(const DecisionTransformer<double>&, const EpisodeTokens&);

}  // namespace pivotdt
