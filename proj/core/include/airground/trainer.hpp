#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "airground/mdp.hpp"
#include "airground/neural.hpp"
#include "airground/rng.hpp"
#include "airground/scenario.hpp"

namespace airground {

/// States are shared: a transition's s_next is the following transition's s.
struct Transition {
  std::shared_ptr<const GlobalState> s;
  nn::Tensor2 a_m;  // executed goals, n_max x 2
  nn::Tensor2 a_w;  // executed post-shift scores, n_max x vehicles
  double r_ex = 0.0;
  double r_in = 0.0;
  std::shared_ptr<const GlobalState> s_next;
  bool done = false;
};

/// Fixed-capacity ring of transitions; the oldest entry is overwritten when
/// full. push() may be called from several producer threads.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  /// Uniform draws with replacement. nullopt while fewer than `n` items.
  std::optional<std::vector<const Transition*>> sample(std::size_t n, Rng& rng) const;
  const Transition& at(std::size_t i) const;  // 0 = oldest retained

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // next write position once full
  mutable std::mutex mutex_;
};

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  int batch_size = 32;
  double lr_actor = 0.005;
  double lr_critic = 0.005;
  double tau = 0.005;
  std::size_t buffer_capacity = 100000;
  int episodes = 200;
  std::size_t warmup = 500;
  int update_every = 1;  // environment steps per update sweep
  double noise_start = 0.3;
  double noise_end = 0.02;
  int noise_decay_episodes = 0;  // 0 -> episodes
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double grad_clip = 1.0;
  double reward_scale = 1.0;
  double preact_decay = 0.0;  // see Actor::backward
  int checkpoint_every = 0;  // episodes, 0 = only final

  void validate() const;
  double noise_at(int episode) const;
};

/// Parameter update rule with per-parameter state for Adam.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double clip);
  /// Clips the group's gradient norm, applies one step, zeroes gradients.
  /// Returns the pre-clip norm.
  double step(const nn::ParamRefs& params);
  double lr() const { return lr_; }

 private:
  struct Moments {
    nn::Tensor2 m, v;
  };
  OptimizerKind kind_;
  double lr_;
  double clip_;
  long t_ = 0;
  std::vector<Moments> moments_;
  std::vector<const nn::Param*> owners_;
};

struct Optimizers {
  Optimizer critic_m;
  Optimizer critic_w;
  Optimizer actor;

  Optimizers(const TrainConfig& cfg);
};

struct CriticLosses {
  double loss_m = 0.0;
  double loss_w = 0.0;
};

struct ActorGradNorms {
  double grad_m = 0.0;
  double grad_w = 0.0;
};

/// TD targets: y_m = r_ex + gamma Q_m'(s', mu'(s')) and
/// y_w = hybrid(r_ex, r_in) + gamma Q_w'(s', mu'(s')); done drops the
/// bootstrap. Rewards are multiplied by `reward_scale`.
void critic_targets(const nn::PolicyParams& params, std::span<const Transition* const> batch,
                    const RewardWeights& w, double reward_scale, std::vector<double>& y_m,
                    std::vector<double>& y_w);

/// One MSE step on each critic. Returns losses before the step. Throws
/// TrainingFault (leaving parameters untouched) on a non-finite loss.
CriticLosses critic_update(nn::PolicyParams& params, std::span<const Transition* const> batch,
                           const RewardWeights& w, Optimizers& opt, double reward_scale = 1.0);

/// Accumulates deterministic policy gradients of -mean Q into the actor's
/// grads (no parameter change). Returns the manager-head and worker norms.
/// `preact_decay` is averaged over the batch like the Q term.
ActorGradNorms actor_gradients(nn::PolicyParams& params,
                               std::span<const Transition* const> batch, double preact_decay = 0.0);

/// actor_gradients followed by one optimizer step on the actor.
ActorGradNorms actor_update(nn::PolicyParams& params, std::span<const Transition* const> batch,
                            Optimizers& opt, double preact_decay = 0.0);

/// target <- tau * online + (1 - tau) * target for every tensor.
void soft_update(nn::PolicyParams& params, double tau);

struct EpisodeCurve {
  int episode = 0;
  int pn = 0;
  int dn = 0;
  std::optional<double> loss_m;
  std::optional<double> loss_w;
  std::optional<double> grad_m;
  std::optional<double> grad_w;
  double epsilon = 0.0;
};

struct TrainResult {
  std::vector<EpisodeCurve> curves;
  std::size_t updates = 0;
};

struct TrainOutputs {
  std::ostream* curves = nullptr;  // JSONL, one line per episode
  std::string checkpoint_path;     // final (and periodic) checkpoints
};

/// Seeded rollouts with exploration noise interleaved with update sweeps.
/// On a TrainingFault the current parameters are checkpointed (suffix
/// ".fault") before the exception propagates.
TrainResult train(nn::PolicyParams& params, const TrainConfig& cfg, const Scenario& scenario,
                  const RewardWeights& weights, std::uint64_t seed,
                  const TrainOutputs& outputs = {});

/// Serializes one curve row with the documented key order.
std::string curve_json(const EpisodeCurve& c);

Caps caps_for(const ScenarioConfig& config);

}  // namespace airground
