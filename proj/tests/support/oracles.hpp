#pragma once

// Reference implementations shared by the unit tests and the acceptance
// binary. They are deliberately slow and direct.

#include <string>
#include <vector>

#include "airground/assignment.hpp"
#include "airground/mdp.hpp"
#include "airground/neural.hpp"
#include "airground/rng.hpp"

namespace airground::testing {

/// Lexicographically smallest maximum matching by full enumeration.
std::vector<Pair> enumerate_best_matching(const FeasibilityMask& mask);

/// Quadratic re-scan greedy with the documented tie-break.
std::vector<Pair> naive_greedy(const ScoreMatrix& scores, const FeasibilityMask& mask);

/// Integer scores in [0, levels] on unmasked entries, so ties are common.
ScoreMatrix random_scores(Rng& rng, const FeasibilityMask& mask, int levels);

/// True when no feasible pair has both ends free.
bool is_maximal(const Assignment& a, const FeasibilityMask& mask);

struct GradCheck {
  int checked = 0;
  int bad = 0;
  double worst = 0.0;  // max relative error
  std::string first_bad;
};

/// Central differences on up to `per_param` random entries of every actor
/// parameter, for the loss sum(Wg * goals) + sum(Wr * raw) + the
/// pre-activation decay term, with the worker goal input held fixed.
GradCheck check_actor_gradients(nn::Actor& actor, const GlobalState& gs, Rng& rng, int per_param,
                                double tol, double preact_decay = 0.0);

/// Central differences on every critic parameter and input for Q . w.
GradCheck check_critic_gradients(nn::Critic& critic, const nn::Tensor2& x, Rng& rng, double tol);

nn::Tensor2 random_tensor(Rng& rng, Eigen::Index rows, Eigen::Index cols);

std::vector<int> shuffled(Rng& rng, int n);

/// New UAV slot i holds old slot perm[i].
GlobalState permute_uavs(const GlobalState& gs, const std::vector<int>& perm);
/// New carrier slot i holds old slot perm[i].
GlobalState permute_carriers(const GlobalState& gs, const std::vector<int>& perm);
/// New order slot i holds old slot perm[i].
GlobalState permute_orders(const GlobalState& gs, const std::vector<int>& perm);

}  // namespace airground::testing
