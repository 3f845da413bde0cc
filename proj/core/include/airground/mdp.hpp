#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "airground/assignment.hpp"
#include "airground/engine.hpp"
#include "airground/feasibility.hpp"
#include "airground/trace.hpp"
#include "airground/world.hpp"

namespace airground {

struct Caps {
  int n_max = 16;
  int n_uav = 6;
  int n_carrier = 6;

  int vehicles() const { return n_uav + n_carrier; }
};

inline constexpr int kOrderFeatures = 6;    // origin x,y; dest x,y; release; deadline
inline constexpr int kUavFeatures = 5;      // x, y, speed, available, battery
inline constexpr int kCarrierFeatures = 4;  // x, y, speed, available
inline constexpr int kSysFeatures = 8;
/// Per (order, vehicle) pair, in the vehicle's own distance metric:
/// approach distance, order distance, deadline slack, energy margin (0 for
/// carriers).
inline constexpr int kPairFeatures = 4;

/// Scales used to map raw quantities into [0, 1].
struct Normalizer {
  BoundingBox bounds;
  double distance_scale = 1.0;  // km mapped to 1
  double t_max = 50.0;
  double max_speed_kmh = 120.0;

  static Normalizer for_world(const WorldState& state, double max_speed_kmh);
  double nx(double x) const;
  double ny(double y) const;
};

/// Fixed-length encoding of the world. Order slots are sorted by
/// (deadline, id); vehicle slots follow fleet order. Slots past the active
/// count are zero with their flags cleared. Every feature lies in [0, 1].
///
/// Besides the four segments this carries the action mask and pair features
/// on the slot grid (n_max x (n_uav + n_carrier)) so that a stored state is
/// enough to recompute the policy's action.
struct GlobalState {
  Caps caps;
  std::vector<double> order_seg;    // n_max x 6
  std::vector<double> uav_seg;      // n_uav x 5
  std::vector<double> carrier_seg;  // n_carrier x 4
  std::array<double, kSysFeatures> sys_seg{};
  std::vector<std::uint8_t> valid_order;  // n_max

  std::vector<OrderId> order_ids;  // slot -> id, -1 when empty
  std::vector<VehicleId> uav_ids;
  std::vector<VehicleId> carrier_ids;

  std::vector<std::uint8_t> pair_valid;  // n_max x vehicles
  std::vector<double> pair_feat;         // n_max x vehicles x kPairFeatures

  int active_orders() const;
  std::size_t pair_index(int slot, int col) const {
    return static_cast<std::size_t>(slot) * caps.vehicles() + col;
  }
};

/// Encodes the state. When a mask is given, pair validity and features are
/// filled for its rows; orders beyond n_max are deferred keeping the earliest
/// deadlines.
GlobalState encode_state(const WorldState& state, const Caps& caps, const Normalizer& norm,
                         const FeasibilityMask* mask = nullptr,
                         const EnergyModel* em = nullptr);

struct RewardWeights {
  double lambda_m = 1.5;
  double lambda_p = 3.0;
  double lambda_d = 10.0;
  double lambda_t = 0.2;
  double lambda_r = 1.0;
  double alpha = 0.1;
  double gamma = 0.99;
  bool shaping = true;              // false: reward is lambda_d * N^d only
  bool normalize_intrinsic = true;  // divide the +-1 sum by executed pairs

  void validate() const;
};

/// Shaped extrinsic reward:
///   lambda_m N^m + lambda_p N^p + lambda_d N^d
///   + lambda_r (N^p + N^d) / max(cum_matched, 1)
///   + lambda_t (1 - t / T_max)
double extrinsic_reward(const StepReport& report, int cum_matched, int clock,
                        const RewardWeights& w, int t_max);

/// UAV is the goal's mode iff goal[uav] > 0.5 (ties go to the carrier).
VehicleKind goal_mode(const std::array<double, 2>& goal);

/// +1 per executed pair whose vehicle kind equals the goal mode, -1 otherwise;
/// optionally averaged over executed pairs. Empty assignment gives 0. Throws
/// ContractViolation if an executed order has no goal.
double intrinsic_reward(const GoalMap& goals, const Assignment& executed,
                        const RewardWeights& w);

double hybrid_reward(double r_ex, double r_in, const RewardWeights& w);

}  // namespace airground
