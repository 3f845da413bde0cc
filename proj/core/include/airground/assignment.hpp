#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "airground/feasibility.hpp"

namespace airground {

inline constexpr double kMaskedScore = -std::numeric_limits<double>::infinity();

/// Scores with the same indexing as a FeasibilityMask. Masked entries hold
/// kMaskedScore; everything else is finite.
struct ScoreMatrix {
  std::vector<OrderId> orders;
  std::vector<VehicleId> uav_cols;
  std::vector<VehicleId> carrier_cols;
  std::vector<double> entries;

  std::size_t rows() const { return orders.size(); }
  std::size_t cols() const { return uav_cols.size() + carrier_cols.size(); }
  double at(std::size_t r, std::size_t c) const { return entries[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return entries[r * cols() + c]; }

  /// All-sentinel matrix indexed like `mask`.
  static ScoreMatrix masked_like(const FeasibilityMask& mask);
};

struct Pair {
  OrderId order_id = 0;
  VehicleRef vehicle;

  friend auto operator<=>(const Pair&, const Pair&) = default;
};

struct Assignment {
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Throws ContractViolation if an order or vehicle repeats or a pair is masked.
void validate_assignment(const Assignment& a, const FeasibilityMask& mask);

/// Repeatedly takes the highest-scoring unmasked pair whose order and vehicle
/// are both still free. Equal scores resolve by lower order id, then UAV
/// before carrier, then lower vehicle id. The result is a maximal matching.
Assignment greedy_match(const ScoreMatrix& scores, const FeasibilityMask& mask);

enum class ExactMethod { Matching, BranchAndBound };

struct ExactOptions {
  std::size_t max_rows = 50;
  std::size_t max_cols = 50;
  ExactMethod method = ExactMethod::Matching;
};

/// Maximum-cardinality one-to-one assignment respecting the mask. Among
/// optimal assignments the lexicographically smallest pair list (sorted by
/// order id, vehicle kind, vehicle id) is returned. Throws SizeError over cap.
Assignment exact_match(const FeasibilityMask& mask, const ExactOptions& options = {});

inline constexpr std::size_t kBranchAndBoundCap = 12;

/// Depth-first branch and bound over the order-count ILP. Same optimum and
/// tie-break as exact_match; limited to 12 x 12.
Assignment exact_match_branch_and_bound(const FeasibilityMask& mask);

/// Cardinality of a maximum matching (Hopcroft-Karp).
std::size_t max_matching_size(const FeasibilityMask& mask);

/// Negated total distance (vehicle -> origin -> destination): Euclidean for
/// UAVs, road for carriers. Masked entries get the sentinel.
ScoreMatrix greedy_distance_policy(const WorldState& state, const FeasibilityMask& mask);

}  // namespace airground
