#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "airground/geo.hpp"

namespace airground {

using OrderId = std::int64_t;
using VehicleId = std::int64_t;

/// Enumerator order is the lifecycle order; status only ever moves forward.
enum class OrderStatus { Pending, Matched, PickedUp, Delivered, Expired };

enum class VehicleKind { Uav, Carrier };

enum class UavStatus { Idle, Serving, Charging };
enum class CarrierStatus { Idle, Serving };

std::string_view to_string(OrderStatus s);
std::string_view to_string(VehicleKind k);
std::string_view to_string(UavStatus s);
std::string_view to_string(CarrierStatus s);

struct Order {
  OrderId id = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  int release_time = 0;
  int deadline = 1;
  OrderStatus status = OrderStatus::Pending;
};

/// Moves an order along its lifecycle. Throws ContractViolation for any
/// transition other than Pending->Matched->PickedUp->Delivered or
/// Pending->Expired.
void advance_status(Order& order, OrderStatus next);

struct Uav {
  VehicleId id = 0;
  Point location;
  double speed_kmh = 60.0;
  bool available = true;
  double battery = 1.0;  // ratio of capacity
  double battery_capacity_kwh = 1.0;
  UavStatus status = UavStatus::Idle;

  double energy_kwh() const { return battery * battery_capacity_kwh; }
};

struct Carrier {
  VehicleId id = 0;
  NodeId location_node = 0;
  double speed_kmh = 45.0;
  bool available = true;
  CarrierStatus status = CarrierStatus::Idle;
};

struct ChargingStation {
  std::int64_t id = 0;
  Point location;
};

struct VehicleRef {
  VehicleKind kind = VehicleKind::Uav;
  VehicleId id = 0;

  friend auto operator<=>(const VehicleRef&, const VehicleRef&) = default;
};

enum class MissionPhase { ToPickup, ToDelivery, ToCharge };

std::string_view to_string(MissionPhase p);

struct Leg {
  Point waypoint;
  std::optional<NodeId> node;  // set for carrier legs
  int arrival = 0;             // planned arrival timestep
};

/// Active work of one vehicle. The route is a polyline walked at constant
/// speed; `pickup_km` and `total_km` are the cumulative route distances at
/// which pickup and delivery happen.
struct Mission {
  VehicleRef vehicle;
  OrderId order_id = -1;  // -1 for charging trips
  std::vector<Leg> legs;
  MissionPhase phase = MissionPhase::ToPickup;

  std::vector<Point> route;
  std::vector<NodeId> route_nodes;  // carriers: one entry per route point
  std::vector<double> route_cum_km;
  std::size_t segment = 0;  // index of the route point last passed
  double travelled_km = 0.0;
  double pickup_km = 0.0;
  double total_km = 0.0;
  int started_at = 0;
  bool charging_at_station = false;
};

/// Eight normalized macroscopic statistics. Slot 8 is reserved and always 0.
struct SystemStats {
  double timestep_ratio = 0.0;
  double order_ratio = 0.0;
  double matching_rate = 0.0;
  double fleet_utilization = 0.0;
  double uav_failure_rate = 0.0;
  double charging_frequency = 0.0;
  double uav_proportion = 0.0;
  double reserved_zero = 0.0;

  std::array<double, 8> as_array() const {
    return {timestep_ratio,     order_ratio,        matching_rate,  fleet_utilization,
            uav_failure_rate,   charging_frequency, uav_proportion, reserved_zero};
  }
};

/// Running totals behind SystemStats and the episode metrics.
struct Counters {
  int released = 0;
  int matched = 0;
  int picked = 0;
  int delivered = 0;
  int delivered_uav = 0;
  int delivered_carrier = 0;
  int expired = 0;
  int failed_deliveries = 0;
  int uav_missions = 0;
  int uav_late_deliveries = 0;
  int charge_trips = 0;
  int battery_underflows = 0;  // energy spent beyond what was stored
};

struct WorldState {
  explicit WorldState(RoadNetwork network) : net(std::move(network)) {}

  int clock = 0;
  int t_max = 50;
  int order_capacity = 16;  // N_max, normalizes the active-order statistic
  RoadNetwork net;
  std::vector<Order> orders;
  std::vector<Uav> uavs;
  std::vector<Carrier> carriers;
  std::vector<ChargingStation> stations;
  SystemStats stats;
  std::vector<Mission> active_missions;
  Counters counters;

  const Order& order(OrderId id) const;
  Order& order(OrderId id);
  const Uav& uav(VehicleId id) const;
  Uav& uav(VehicleId id);
  const Carrier& carrier(VehicleId id) const;
  Carrier& carrier(VehicleId id);

  /// Current position of any vehicle (carriers report their last node).
  Point position(VehicleRef v) const;
};

/// Pending orders with release_time <= clock < deadline.
std::vector<Order> active_orders(const WorldState& state);

struct IdleVehicles {
  std::vector<Uav> uavs;
  std::vector<Carrier> carriers;
};

/// Vehicles whose status is Idle. Charging UAVs are excluded.
IdleVehicles idle_vehicles(const WorldState& state);

/// Marks Pending orders with deadline <= clock as Expired and returns how many
/// changed. Matched and PickedUp orders are never expired.
int expire_orders(WorldState& state);

/// Recomputes the eight statistics from the counters and fleet status.
/// `order_capacity` normalizes the active-order count.
void refresh_stats(WorldState& state, int order_capacity);

/// Returns the index of the station nearest to p (ties: lowest station id).
/// Throws ConfigError when the list is empty.
std::size_t nearest_station(const std::vector<ChargingStation>& stations, Point p);

std::vector<Order> load_orders(const std::string& path);
void write_orders(const std::vector<Order>& orders, const std::string& path);
std::vector<ChargingStation> load_stations(const std::string& path);
void write_stations(const std::vector<ChargingStation>& stations, const std::string& path);

}  // namespace airground
