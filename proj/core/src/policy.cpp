#include "airground/policy.hpp"

namespace airground {

Decision GreedyDistancePolicy::decide(const WorldState& state, const FeasibilityMask& mask) {
  Decision d;
  d.scores = greedy_distance_policy(state, mask);
  d.assignment = greedy_match(*d.scores, mask);
  return d;
}

Decision ExactPolicy::decide(const WorldState& /*state*/, const FeasibilityMask& mask) {
  Decision d;
  d.assignment = exact_match(mask, options_);
  return d;
}

Decision RandomPolicy::decide(const WorldState& /*state*/, const FeasibilityMask& mask) {
  auto scores = ScoreMatrix::masked_like(mask);
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (mask.at(r, c)) scores.at(r, c) = rng_.uniform01();
    }
  }
  Decision d;
  d.assignment = greedy_match(scores, mask);
  d.scores = std::move(scores);
  return d;
}

HierarchicalPolicy::HierarchicalPolicy(const nn::Actor& actor, const Caps& caps,
                                       double max_speed_kmh, EnergyModel em)
    : actor_(&actor), caps_(caps), max_speed_kmh_(max_speed_kmh), em_(em) {}

void HierarchicalPolicy::begin_episode(std::uint64_t seed) { rng_ = Rng(derive_seed(seed, 0x4a7e)); }

Decision HierarchicalPolicy::decide(const WorldState& state, const FeasibilityMask& mask) {
  const auto norm = Normalizer::for_world(state, max_speed_kmh_);
  last_state_ = encode_state(state, caps_, norm, &mask, &em_);
  auto scored = nn::score_all(*actor_, last_state_, mask, noise_, rng_);
  last_goals_ = std::move(scored.goals_slots);
  last_scores_ = std::move(scored.shifted_slots);
  Decision d;
  d.assignment = greedy_match(scored.scores, mask);
  d.scores = std::move(scored.scores);
  d.goals = std::move(scored.goals);
  return d;
}

}  // namespace airground
