#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "airground/assignment.hpp"
#include "airground/engine.hpp"
#include "airground/mdp.hpp"
#include "airground/neural.hpp"
#include "airground/rng.hpp"

namespace airground {

/// Smallest total distance first, then greedy matching.
class GreedyDistancePolicy : public DispatchPolicy {
 public:
  std::string name() const override { return "greedy"; }
  Decision decide(const WorldState& state, const FeasibilityMask& mask) override;
};

/// Maximum-cardinality assignment per epoch (the ILP optimum).
class ExactPolicy : public DispatchPolicy {
 public:
  explicit ExactPolicy(ExactOptions options = {}) : options_(options) {}
  std::string name() const override { return "exact"; }
  Decision decide(const WorldState& state, const FeasibilityMask& mask) override;

 private:
  ExactOptions options_;
};

/// Uniform random scores over feasible pairs.
class RandomPolicy : public DispatchPolicy {
 public:
  std::string name() const override { return "random"; }
  void begin_episode(std::uint64_t seed) override { rng_ = Rng(derive_seed(seed, 0x7a11)); }
  Decision decide(const WorldState& state, const FeasibilityMask& mask) override;

 private:
  Rng rng_{0};
};

/// Manager/worker actor scoring followed by greedy matching. Holds a
/// reference to the actor so training rollouts see the latest parameters.
class HierarchicalPolicy : public DispatchPolicy {
 public:
  HierarchicalPolicy(const nn::Actor& actor, const Caps& caps, double max_speed_kmh,
                     EnergyModel em);

  std::string name() const override { return "hrl4ag"; }
  void begin_episode(std::uint64_t seed) override;
  Decision decide(const WorldState& state, const FeasibilityMask& mask) override;

  void set_noise(double stddev) { noise_ = stddev; }
  double noise() const { return noise_; }

  /// State and action of the most recent decision, for replay.
  const GlobalState& last_state() const { return last_state_; }
  const nn::Tensor2& last_goals() const { return last_goals_; }
  const nn::Tensor2& last_scores() const { return last_scores_; }

 private:
  const nn::Actor* actor_;
  Caps caps_;
  double max_speed_kmh_;
  EnergyModel em_;
  double noise_ = 0.0;
  Rng rng_{0};
  GlobalState last_state_;
  nn::Tensor2 last_goals_;
  nn::Tensor2 last_scores_;
};

}  // namespace airground
