#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "airground/feasibility.hpp"
#include "airground/geo.hpp"
#include "airground/world.hpp"

namespace airground {

enum class FleetMode { Mixed, UavOnly, CarrierOnly };

std::string_view to_string(FleetMode m);
FleetMode parse_fleet_mode(std::string_view s);

/// Synthetic rows x cols grid. Edge lengths are the straight-line length times
/// a seeded tortuosity factor drawn from [1, tortuosity_max].
struct GridNetworkSpec {
  int rows = 4;
  int cols = 5;
  double spacing_km = 2.0;
  double tortuosity_max = 1.3;
  std::uint64_t seed = 7;
};

struct NetworkSource {
  std::string nodes_path;  // empty -> grid
  std::string edges_path;
  GridNetworkSpec grid;

  bool from_files() const { return !nodes_path.empty(); }
};

/// Seeded arrival process. With `count` set, exactly that many orders are
/// produced with exponential inter-arrival gaps; otherwise each timestep of
/// the horizon draws a Poisson number of arrivals. Endpoints are uniform
/// points in the network bounds mapped to their nearest road node.
struct OrderGeneratorSpec {
  double arrival_rate = 1.0;  // orders per timestep
  double demand_ratio = 0.0;  // > 0: arrival_rate = demand_ratio * fleet size
  std::optional<int> count;
  int deadline_min = 15;  // slack after release, timesteps
  int deadline_max = 30;
  bool distinct_endpoints = true;
};

struct OrderSource {
  std::string path;  // empty -> generator
  OrderGeneratorSpec generator;

  bool from_file() const { return !path.empty(); }
};

/// Stations either from CSV or placed on an evenly spaced grid inside the
/// network bounds.
struct StationSource {
  std::string path;
  int grid_rows = 2;
  int grid_cols = 2;

  bool from_file() const { return !path.empty(); }
};

struct FleetSpec {
  int n_uav = 6;
  int n_carrier = 6;
  double uav_speed_kmh = 60.0;
  double carrier_speed_kmh = 45.0;
  double uav_capacity_kwh = 1.0;

  int total() const { return n_uav + n_carrier; }
};

struct ScenarioConfig {
  NetworkSource network;
  OrderSource orders;
  StationSource stations;
  FleetSpec fleet;
  EnergyModel energy;
  int t_max = 50;
  int n_max = 16;  // maximum concurrent orders offered per epoch
  FleetMode mode = FleetMode::Mixed;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  double arrival_rate() const;
  double max_speed_kmh() const;
};

/// Applies a --mode override: the whole fleet becomes the selected kind.
void apply_mode(ScenarioConfig& config, FleetMode mode);

/// Static data of a scenario: network, stations, and file-backed orders.
struct Scenario {
  ScenarioConfig config;
  std::shared_ptr<const RoadNetwork> net;
  std::vector<ChargingStation> stations;
  std::optional<std::vector<Order>> file_orders;
};

Scenario load_scenario(const ScenarioConfig& config);

RoadNetwork generate_grid_network(const GridNetworkSpec& spec);
std::vector<ChargingStation> generate_grid_stations(const RoadNetwork& net, int rows, int cols);

/// Orders for one episode from the generator spec and seed.
std::vector<Order> generate_orders(const RoadNetwork& net, const OrderGeneratorSpec& spec,
                                   double arrival_rate, int t_max, std::uint64_t seed);

/// Fresh world at clock 0: orders from file or generator, UAVs parked at
/// stations round-robin with full batteries, carriers on seeded random nodes.
WorldState make_world(const Scenario& scenario, std::uint64_t seed);

}  // namespace airground
