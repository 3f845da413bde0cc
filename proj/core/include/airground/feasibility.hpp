#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "airground/world.hpp"

namespace airground {

struct EnergyModel {
  double eta_kwh_per_km = 0.01;
  double charge_threshold = 0.40;
  double recharge_rate = 1.0 / 30.0;  // battery ratio restored per timestep

  /// Throws ConfigError on eta <= 0, threshold outside (0,1) or rate <= 0.
  void validate() const;
};

/// One timestep is one simulated minute.
inline constexpr double kMinutesPerStep = 1.0;

/// Whole timesteps needed to cover `km` at `speed_kmh`, rounded up.
int travel_steps(double km, double speed_kmh);

/// Distance covered by a vehicle in one timestep.
double km_per_step(double speed_kmh);

/// Optimistic deadline filter on straight-line distance
/// (vehicle -> origin -> destination).
bool ddl_check_euclidean(const RoadNetwork& net, Point vehicle_loc, const Order& order,
                         int clock, double speed_kmh);

/// Exact deadline check for a carrier over road distances. Unreachable legs
/// make the pair infeasible.
bool ddl_check_road(const RoadNetwork& net, const Carrier& carrier, const Order& order,
                    int clock);

/// Energy needed for current -> pickup -> delivery -> nearest station.
double safe_return_energy_kwh(Point uav_loc, Point origin, Point destination,
                              const std::vector<ChargingStation>& stations,
                              const EnergyModel& em);

/// True when the UAV's stored energy covers the full loop
/// current -> pickup -> delivery -> station nearest the delivery point.
bool energy_safe_return(const Uav& uav, Point origin, Point destination,
                        const std::vector<ChargingStation>& stations, const EnergyModel& em);

/// Boolean order x vehicle matrix. Columns are all UAVs (ascending id)
/// followed by all carriers (ascending id); rows are the requested orders.
struct FeasibilityMask {
  std::vector<OrderId> orders;
  std::vector<VehicleId> uav_cols;
  std::vector<VehicleId> carrier_cols;
  std::vector<std::uint8_t> entries;  // row-major

  std::size_t rows() const { return orders.size(); }
  std::size_t cols() const { return uav_cols.size() + carrier_cols.size(); }
  bool at(std::size_t r, std::size_t c) const { return entries[r * cols() + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { entries[r * cols() + c] = v ? 1 : 0; }
  VehicleRef column(std::size_t c) const;
  std::size_t count() const;

  static FeasibilityMask empty(std::vector<OrderId> orders, std::vector<VehicleId> uav_cols,
                               std::vector<VehicleId> carrier_cols);
};

/// Candidate dispatch rows for the current clock: active orders, at most
/// `row_cap` of them chosen by (deadline, id), returned in ascending id order.
std::vector<OrderId> candidate_orders(const WorldState& state, std::size_t row_cap);

/// Mask over the given order rows and every vehicle. Inactive orders and
/// non-idle vehicles yield all-false rows and columns.
FeasibilityMask build_mask(const WorldState& state, const EnergyModel& em,
                           std::span<const OrderId> order_rows);

/// Mask over `candidate_orders(state, row_cap)`.
FeasibilityMask build_mask(const WorldState& state, const EnergyModel& em,
                           std::size_t row_cap);

}  // namespace airground
