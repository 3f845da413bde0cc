#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "airground/mdp.hpp"
#include "airground/rng.hpp"

namespace airground::nn {

/// Dense row-major matrix of doubles.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Tensor2::Zero(rows, cols)), grad(Tensor2::Zero(rows, cols)) {}
};

using ParamRefs = std::vector<Param*>;
using ConstParamRefs = std::vector<const Param*>;

void zero_grads(const ParamRefs& params);
double grad_norm(const ParamRefs& params);
/// Scales gradients so their joint L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(const ParamRefs& params, double max_norm);

/// y = x W^T + b
struct Linear {
  Param w;
  Param b;

  Linear() = default;
  Linear(const std::string& name, int in, int out);
  /// Uniform in +-1/sqrt(fan_in) for weights and bias.
  void init(Rng& rng);
  Tensor2 forward(const Tensor2& x) const;
  /// Accumulates parameter gradients; returns dL/dx.
  Tensor2 backward(const Tensor2& x, const Tensor2& dy);
  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
  int in() const { return static_cast<int>(w.value.cols()); }
  int out() const { return static_cast<int>(w.value.rows()); }
};

/// Row-wise layer normalization with learned scale and offset.
struct LayerNorm {
  Param gamma;
  Param beta;
  double eps = 1e-5;

  struct Cache {
    Tensor2 xhat;
    Eigen::VectorXd inv_std;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);
  Tensor2 forward(const Tensor2& x, Cache* cache = nullptr) const;
  Tensor2 backward(const Cache& cache, const Tensor2& dy);
  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
};

/// Pre-norm transformer block over a set, with no positional parameters:
///   X0 = in(X);  X1 = X0 + MHA(LN1(X0));  out = X1 + FF(LN2(X1))
/// Only valid rows enter attention, so padded slots never influence others.
struct SetEncoder {
  Linear in;
  LayerNorm ln1;
  Linear wq, wk, wv, wo;
  LayerNorm ln2;
  Linear ff1, ff2;
  int heads = 4;

  struct Cache {
    std::vector<int> rows;  // valid slot indices
    Tensor2 x, x0, l1, q, k, v, attn_cat, x1, l2, f1, r;
    std::vector<Tensor2> probs;  // per head, n x n
    LayerNorm::Cache ln1c, ln2c;
  };

  SetEncoder() = default;
  SetEncoder(const std::string& name, int in_dim, int hidden, int heads);
  void init(Rng& rng);
  /// `x` holds one row per slot; `valid` selects rows (empty = all). Output has
  /// the same row count with invalid rows zero.
  Tensor2 forward(const Tensor2& x, const std::vector<std::uint8_t>& valid,
                  Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Tensor2& d_out);
  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
};

struct NetConfig {
  int hidden = 256;
  int heads = 4;
  bool hierarchy = true;         // false: one flat scorer, no manager goals
  bool strict_goal_mask = false; // true: the goal's mode is the only one scored
  bool critic_pair_features = true;
  int critic_hidden = 0;  // 0: same as hidden

  int critic_width() const { return critic_hidden > 0 ? critic_hidden : hidden; }
  void validate() const;
};

/// Entity embeddings: U (n_uav x H), C (n_carrier x H), O (n_max x H, invalid
/// rows zero), G (1 x H).
struct Embeddings {
  Tensor2 u, c, o, g;
  std::vector<std::uint8_t> u_valid, c_valid, o_valid;
};

struct Encoders {
  SetEncoder uav, carrier, order;
  Linear sys;

  struct Cache {
    SetEncoder::Cache u, c, o;
    Tensor2 sys_in;
  };

  Encoders() = default;
  Encoders(int hidden, int heads);
  void init(Rng& rng);
  Embeddings forward(const GlobalState& gs, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Embeddings& d);
  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
};

/// Worker and manager inputs for one order slot.
struct FusedContext {
  RowVec z;     // pooled U | pooled C | O[o] | G          (4H)
  Tensor2 u_o;  // per UAV:     U[v] | O[o] | G          (n_uav x 3H)
  Tensor2 c_o;  // per carrier: C[v] | O[o] | G          (n_carrier x 3H)
};

/// Mean over the rows flagged valid; zero vector for an empty set.
RowVec masked_mean(const Tensor2& x, const std::vector<std::uint8_t>& valid);

FusedContext fuse_contexts(const Embeddings& e, int order_slot);

/// g = Softmax(MLP(LN(z))), MLP = Linear(4H,H) -> ReLU -> Linear(H,2).
struct Manager {
  LayerNorm ln;
  Linear l1, l2;

  Manager() = default;
  explicit Manager(int hidden);
  void init(Rng& rng);
  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
};

std::array<double, 2> manager_forward(const Manager& m, const RowVec& z);

/// Mode-specific worker:
///   q = ReLU(phi([context | pair features]) | psi(goal))
///   score = tanh(w2 ReLU(w1 q))
struct Worker {
  Linear phi, psi, w1, w2;

  Worker() = default;
  Worker(const std::string& name, int hidden);
  void init(Rng& rng);
  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
};

/// Score in (-1, 1) for one vehicle context row (3H wide), its pair features,
/// and the manager goal.
double worker_forward(const Worker& w, std::span<const double> context,
                      std::span<const double> pair_features, const std::array<double, 2>& goal);

/// Q(s, a) = Linear(H,1)(ReLU(Linear(H,H)(ReLU(Linear(D,H)(x))))).
struct Critic {
  Linear l1, l2, l3;

  struct Cache {
    Tensor2 x, h1, r1, h2, r2;
  };

  Critic() = default;
  Critic(const std::string& name, int input_dim, int hidden);
  void init(Rng& rng);
  /// Batched: one input row per sample; returns a column of Q values.
  Eigen::VectorXd forward(const Tensor2& x, Cache* cache = nullptr) const;
  /// Returns dL/dx given dL/dQ per sample, accumulating parameter gradients.
  Tensor2 backward(const Cache& cache, const Eigen::VectorXd& dq);
  /// dL/dx only; parameter gradients are left untouched.
  Tensor2 input_grad(const Cache& cache, const Eigen::VectorXd& dq) const;
  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
  int input_dim() const { return l1.in(); }
};

/// Per-slot outputs of the full actor. Goals are n_max x 2 (zero rows for
/// empty slots); raw scores are n_max x vehicles in (-1, 1), zero where the
/// pair is not valid.
struct ActorOutput {
  Tensor2 goals;
  Tensor2 logits;
  Tensor2 goals_in;  // what the workers were conditioned on
  Tensor2 raw_scores;
};

struct Actor {
  NetConfig cfg;
  Encoders enc;
  Manager manager;
  Worker worker_uav;
  Worker worker_carrier;

  struct WorkerCache {
    std::vector<int> pair_slot, pair_vehicle;  // per scored pair
    Tensor2 pf;     // pair features, P x kPairFeatures
    Tensor2 phi;    // pre-activation, P x H
    Tensor2 psi;    // pre-activation per slot, n_max x H
    Tensor2 hpre;   // P x H
    Tensor2 score;  // P x 1, after tanh
  };
  struct Cache {
    Encoders::Cache enc;
    Embeddings emb;
    std::vector<int> order_slots;
    Tensor2 z, lnz, m1, logits, goals;
    LayerNorm::Cache lnc;
    Tensor2 goals_in;
    WorkerCache wu, wc;
  };

  Actor() = default;
  explicit Actor(const NetConfig& cfg);
  void init(Rng& rng);

  /// Full forward pass. `goal_override` (n_max x 2) replaces the manager's
  /// goals as worker input; `perturb` may then edit that input, seeing the
  /// manager logits. Exploration noise on goals enters through `perturb`.
  using GoalPerturb = std::function<void(Tensor2& goals_in, const Tensor2& logits)>;
  ActorOutput forward(const GlobalState& gs, const Tensor2* goal_override = nullptr,
                      Cache* cache = nullptr, const GoalPerturb& perturb = {}) const;

  /// Accumulates gradients for dL/dgoals (manager path) and dL/draw_scores
  /// (worker path). The goal fed to the workers is treated as a constant.
  /// `preact_decay` adds the gradient of decay * (sum log cosh(score pre-tanh)
  /// + sum logit^2 / 2), which keeps the output heads out of saturation.
  void backward(const GlobalState& gs, const Cache& cache, const Tensor2& d_goals,
                const Tensor2& d_raw_scores, double preact_decay = 0.0);

  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;
  void collect_manager(ParamRefs& out);  // manager head only
  void collect_workers(ParamRefs& out);
  void collect_encoders(ParamRefs& out);
};

/// Critic input rows.
int state_feature_dim(const Caps& caps);
int manager_action_dim(const Caps& caps);
int worker_action_channels(const NetConfig& cfg);
int worker_action_dim(const Caps& caps, const NetConfig& cfg);
void write_state_features(const GlobalState& gs, std::span<double> out);
/// Goals for valid slots, zero elsewhere.
void write_manager_action(const GlobalState& gs, const Tensor2& goals, std::span<double> out);
/// Per pair: post-shift score (0 when invalid), validity, and optionally the
/// pair features.
void write_worker_action(const GlobalState& gs, const NetConfig& cfg, const Tensor2& shifted,
                         std::span<double> out);

/// Online and target copies of every network.
struct PolicyParams {
  NetConfig cfg;
  Caps caps;
  Actor actor;
  Critic critic_m;
  Critic critic_w;
  Actor actor_target;
  Critic critic_m_target;
  Critic critic_w_target;

  PolicyParams(const NetConfig& cfg, const Caps& caps, std::uint64_t seed);

  ParamRefs online();
  ParamRefs target();
  ConstParamRefs online() const;
  ConstParamRefs target() const;
  /// Online params followed by target params; the checkpoint order.
  ConstParamRefs all() const;
  ParamRefs all();
  void sync_targets();
};

/// Scores for the current mask. Valid pairs get (tanh score + N(0, noise))
/// clamped to [-1, 1], shifted to [0, 1] by (s + 1) / 2; everything else is the
/// masked sentinel. Goals are per order id; manager noise is added to logits.
struct ScoredDecision {
  ScoreMatrix scores;
  GoalMap goals;
  Tensor2 goals_slots;    // executed goals per slot
  Tensor2 shifted_slots;  // executed post-shift scores per slot
};

ScoredDecision score_all(const Actor& actor, const GlobalState& gs, const FeasibilityMask& mask,
                         double explore_noise, Rng& rng);

/// Checkpoint: "HRL4AG01", u32 tensor count, (u32 rows, u32 cols) per tensor,
/// then float32 values, all little-endian, in PolicyParams::all() order.
void save_checkpoint(const PolicyParams& params, const std::string& path);
/// Loads into an already-constructed PolicyParams; shapes must match exactly.
void load_checkpoint(PolicyParams& params, const std::string& path);
std::string checkpoint_bytes(const PolicyParams& params);

/// Stable hash of parameter values (FNV-1a over the raw bytes).
std::uint64_t param_hash(const ConstParamRefs& params);
std::uint64_t param_hash(const ParamRefs& params);

}  // namespace airground::nn
