#include "airground/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "airground/errors.hpp"

namespace airground {

void EnergyModel::validate() const {
  if (!(eta_kwh_per_km > 0.0)) throw ConfigError("energy.eta_kwh_per_km: must be > 0");
  if (!(charge_threshold > 0.0 && charge_threshold < 1.0)) {
    throw ConfigError("energy.charge_threshold: must lie in (0, 1)");
  }
  if (!(recharge_rate > 0.0)) throw ConfigError("energy.recharge_rate: must be > 0");
}

int travel_steps(double km, double speed_kmh) {
  if (km <= 0.0) return 0;
  const double minutes = km * 60.0 / speed_kmh;
  // Absorb rounding so that exact multiples do not spill into the next step.
  return static_cast<int>(std::ceil(minutes / kMinutesPerStep - 1e-9));
}

double km_per_step(double speed_kmh) { return speed_kmh * kMinutesPerStep / 60.0; }

bool ddl_check_euclidean(const RoadNetwork& net, Point vehicle_loc, const Order& order,
                         int clock, double speed_kmh) {
  const Point origin = net.point(order.origin);
  const Point dest = net.point(order.destination);
  const double km = euclidean_distance(vehicle_loc, origin) + euclidean_distance(origin, dest);
  return clock + travel_steps(km, speed_kmh) <= order.deadline;
}

bool ddl_check_road(const RoadNetwork& net, const Carrier& carrier, const Order& order,
                    int clock) {
  const auto approach = net.distance(carrier.location_node, order.origin);
  if (!approach) return false;
  const auto delivery = net.distance(order.origin, order.destination);
  if (!delivery) return false;
  return clock + travel_steps(*approach + *delivery, carrier.speed_kmh) <= order.deadline;
}

double safe_return_energy_kwh(Point uav_loc, Point origin, Point destination,
                              const std::vector<ChargingStation>& stations,
                              const EnergyModel& em) {
  const auto& station = stations[nearest_station(stations, destination)];
  const double km = euclidean_distance(uav_loc, origin) + euclidean_distance(origin, destination) +
                    euclidean_distance(destination, station.location);
  return em.eta_kwh_per_km * km;
}

bool energy_safe_return(const Uav& uav, Point origin, Point destination,
                        const std::vector<ChargingStation>& stations, const EnergyModel& em) {
  return uav.energy_kwh() >= safe_return_energy_kwh(uav.location, origin, destination, stations, em);
}

VehicleRef FeasibilityMask::column(std::size_t c) const {
  if (c < uav_cols.size()) return {VehicleKind::Uav, uav_cols[c]};
  return {VehicleKind::Carrier, carrier_cols[c - uav_cols.size()]};
}

std::size_t FeasibilityMask::count() const {
  return static_cast<std::size_t>(std::count(entries.begin(), entries.end(), std::uint8_t{1}));
}

FeasibilityMask FeasibilityMask::empty(std::vector<OrderId> orders, std::vector<VehicleId> uav_cols,
                                       std::vector<VehicleId> carrier_cols) {
  FeasibilityMask m;
  m.orders = std::move(orders);
  m.uav_cols = std::move(uav_cols);
  m.carrier_cols = std::move(carrier_cols);
  m.entries.assign(m.rows() * m.cols(), 0);
  return m;
}

std::vector<OrderId> candidate_orders(const WorldState& state, std::size_t row_cap) {
  auto active = active_orders(state);
  std::sort(active.begin(), active.end(), [](const Order& a, const Order& b) {
    return a.deadline != b.deadline ? a.deadline < b.deadline : a.id < b.id;
  });
  if (active.size() > row_cap) active.resize(row_cap);
  std::vector<OrderId> ids;
  ids.reserve(active.size());
  for (const auto& o : active) ids.push_back(o.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

FeasibilityMask build_mask(const WorldState& state, const EnergyModel& em,
                           std::span<const OrderId> order_rows) {
  std::vector<VehicleId> uav_cols;
  std::vector<VehicleId> carrier_cols;
  for (const auto& u : state.uavs) uav_cols.push_back(u.id);
  for (const auto& c : state.carriers) carrier_cols.push_back(c.id);
  std::sort(uav_cols.begin(), uav_cols.end());
  std::sort(carrier_cols.begin(), carrier_cols.end());

  auto mask = FeasibilityMask::empty({order_rows.begin(), order_rows.end()}, std::move(uav_cols),
                                     std::move(carrier_cols));
  const std::size_t n_uav = mask.uav_cols.size();
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    const Order& order = state.order(mask.orders[r]);
    const bool active = order.status == OrderStatus::Pending &&
                        order.release_time <= state.clock && order.deadline > state.clock;
    if (!active) continue;
    const Point origin = state.net.point(order.origin);
    const Point dest = state.net.point(order.destination);
    for (std::size_t c = 0; c < n_uav; ++c) {
      const Uav& u = state.uav(mask.uav_cols[c]);
      if (u.status != UavStatus::Idle) continue;
      const bool ok = ddl_check_euclidean(state.net, u.location, order, state.clock, u.speed_kmh) &&
                      energy_safe_return(u, origin, dest, state.stations, em);
      mask.set(r, c, ok);
    }
    for (std::size_t c = 0; c < mask.carrier_cols.size(); ++c) {
      const Carrier& v = state.carrier(mask.carrier_cols[c]);
      if (v.status != CarrierStatus::Idle) continue;
      const Point at = state.net.point(v.location_node);
      const bool ok = ddl_check_euclidean(state.net, at, order, state.clock, v.speed_kmh) &&
                      ddl_check_road(state.net, v, order, state.clock);
      mask.set(r, n_uav + c, ok);
    }
  }
  return mask;
}

FeasibilityMask build_mask(const WorldState& state, const EnergyModel& em, std::size_t row_cap) {
  const auto rows = candidate_orders(state, row_cap);
  return build_mask(state, em, std::span<const OrderId>(rows));
}

}  // namespace airground
