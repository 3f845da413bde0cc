#include "airground/world.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>

#include "airground/csv.hpp"
#include "airground/errors.hpp"

namespace airground {

std::string_view to_string(OrderStatus s) {
  switch (s) {
    case OrderStatus::Pending: return "pending";
    case OrderStatus::Matched: return "matched";
    case OrderStatus::PickedUp: return "picked_up";
    case OrderStatus::Delivered: return "delivered";
    case OrderStatus::Expired: return "expired";
  }
  return "unknown";
}

std::string_view to_string(VehicleKind k) { return k == VehicleKind::Uav ? "uav" : "carrier"; }

std::string_view to_string(UavStatus s) {
  switch (s) {
    case UavStatus::Idle: return "idle";
    case UavStatus::Serving: return "serving";
    case UavStatus::Charging: return "charging";
  }
  return "unknown";
}

std::string_view to_string(CarrierStatus s) {
  return s == CarrierStatus::Idle ? "idle" : "serving";
}

std::string_view to_string(MissionPhase p) {
  switch (p) {
    case MissionPhase::ToPickup: return "to_pickup";
    case MissionPhase::ToDelivery: return "to_delivery";
    case MissionPhase::ToCharge: return "to_charge";
  }
  return "unknown";
}

void advance_status(Order& order, OrderStatus next) {
  const auto from = order.status;
  const bool ok = (from == OrderStatus::Pending &&
                   (next == OrderStatus::Matched || next == OrderStatus::Expired)) ||
                  (from == OrderStatus::Matched && next == OrderStatus::PickedUp) ||
                  (from == OrderStatus::PickedUp && next == OrderStatus::Delivered);
  if (!ok) {
    throw ContractViolation("order " + std::to_string(order.id) + ": illegal transition " +
                            std::string(to_string(from)) + " -> " + std::string(to_string(next)));
  }
  order.status = next;
}

namespace {

template <typename Vec>
auto& find_by_id(Vec& items, std::int64_t id, const char* what) {
  // Fleets and order books are kept sorted by id.
  auto it = std::lower_bound(items.begin(), items.end(), id,
                             [](const auto& item, std::int64_t v) { return item.id < v; });
  if (it == items.end() || it->id != id) {
    throw ContractViolation(std::string("unknown ") + what + " " + std::to_string(id));
  }
  return *it;
}

}  // namespace

const Order& WorldState::order(OrderId id) const {
  return find_by_id(orders, id, "order");
}
Order& WorldState::order(OrderId id) { return find_by_id(orders, id, "order"); }
const Uav& WorldState::uav(VehicleId id) const {
  return find_by_id(uavs, id, "uav");
}
Uav& WorldState::uav(VehicleId id) { return find_by_id(uavs, id, "uav"); }
const Carrier& WorldState::carrier(VehicleId id) const {
  return find_by_id(carriers, id, "carrier");
}
Carrier& WorldState::carrier(VehicleId id) { return find_by_id(carriers, id, "carrier"); }

Point WorldState::position(VehicleRef v) const {
  if (v.kind == VehicleKind::Uav) return uav(v.id).location;
  return net.point(carrier(v.id).location_node);
}

std::vector<Order> active_orders(const WorldState& state) {
  std::vector<Order> out;
  for (const auto& o : state.orders) {
    if (o.status == OrderStatus::Pending && o.release_time <= state.clock &&
        o.deadline > state.clock) {
      out.push_back(o);
    }
  }
  return out;
}

IdleVehicles idle_vehicles(const WorldState& state) {
  IdleVehicles out;
  for (const auto& u : state.uavs) {
    if (u.status == UavStatus::Idle) out.uavs.push_back(u);
  }
  for (const auto& c : state.carriers) {
    if (c.status == CarrierStatus::Idle) out.carriers.push_back(c);
  }
  return out;
}

int expire_orders(WorldState& state) {
  int n = 0;
  for (auto& o : state.orders) {
    if (o.status == OrderStatus::Pending && o.deadline <= state.clock) {
      advance_status(o, OrderStatus::Expired);
      ++n;
    }
  }
  state.counters.expired += n;
  return n;
}

void refresh_stats(WorldState& state, int order_capacity) {
  auto ratio = [](double num, double den) {
    if (den <= 0.0) return 0.0;
    return std::clamp(num / den, 0.0, 1.0);
  };
  const auto& c = state.counters;
  int released = 0;
  int active = 0;
  for (const auto& o : state.orders) {
    if (o.release_time <= state.clock) ++released;
    if (o.status == OrderStatus::Pending && o.release_time <= state.clock &&
        o.deadline > state.clock) {
      ++active;
    }
  }
  int busy = 0;
  for (const auto& u : state.uavs) busy += u.status != UavStatus::Idle ? 1 : 0;
  for (const auto& v : state.carriers) busy += v.status != CarrierStatus::Idle ? 1 : 0;
  const double fleet = static_cast<double>(state.uavs.size() + state.carriers.size());

  auto& s = state.stats;
  s.timestep_ratio = ratio(state.clock, state.t_max);
  s.order_ratio = ratio(active, order_capacity);
  s.matching_rate = ratio(c.matched, released);
  s.fleet_utilization = ratio(busy, fleet);
  s.uav_failure_rate = ratio(c.uav_late_deliveries, c.uav_missions);
  s.charging_frequency = ratio(c.charge_trips, c.uav_missions);
  s.uav_proportion = ratio(static_cast<double>(state.uavs.size()), fleet);
  s.reserved_zero = 0.0;
}

std::size_t nearest_station(const std::vector<ChargingStation>& stations, Point p) {
  if (stations.empty()) throw ConfigError("stations: at least one charging station is required");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const double d = euclidean_distance(stations[i].location, p);
    if (d < best_d || (d == best_d && stations[i].id < stations[best].id)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

std::vector<Order> load_orders(const std::string& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, {"order_id", "origin_node", "dest_node", "release_step", "deadline_step"},
                     path);
  std::vector<Order> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    Order o;
    o.id = csv::to_int(row[0], path);
    o.origin = csv::to_int(row[1], path);
    o.destination = csv::to_int(row[2], path);
    o.release_time = static_cast<int>(csv::to_int(row[3], path));
    o.deadline = static_cast<int>(csv::to_int(row[4], path));
    if (o.deadline <= o.release_time) {
      throw InputError(path + ": order " + std::to_string(o.id) + " deadline must exceed release");
    }
    out.push_back(o);
  }
  std::sort(out.begin(), out.end(), [](const Order& a, const Order& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].id == out[i - 1].id) {
      throw InputError(path + ": duplicate order id " + std::to_string(out[i].id));
    }
  }
  return out;
}

void write_orders(const std::vector<Order>& orders, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path);
  out << "order_id,origin_node,dest_node,release_step,deadline_step\n";
  for (const auto& o : orders) {
    out << o.id << ',' << o.origin << ',' << o.destination << ',' << o.release_time << ','
        << o.deadline << '\n';
  }
}

std::vector<ChargingStation> load_stations(const std::string& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, {"station_id", "x_km", "y_km"}, path);
  std::vector<ChargingStation> out;
  for (const auto& row : table.rows) {
    out.push_back({csv::to_int(row[0], path),
                   {csv::to_double(row[1], path), csv::to_double(row[2], path)}});
  }
  std::sort(out.begin(), out.end(),
            [](const ChargingStation& a, const ChargingStation& b) { return a.id < b.id; });
  return out;
}

void write_stations(const std::vector<ChargingStation>& stations, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path);
  out << std::setprecision(17) << "station_id,x_km,y_km\n";
  for (const auto& s : stations) out << s.id << ',' << s.location.x << ',' << s.location.y << '\n';
}

}  // namespace airground
