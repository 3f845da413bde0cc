#include "airground/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "airground/errors.hpp"
#include "airground/rng.hpp"

namespace airground {

std::string_view to_string(FleetMode m) {
  switch (m) {
    case FleetMode::Mixed: return "mixed";
    case FleetMode::UavOnly: return "uav_only";
    case FleetMode::CarrierOnly: return "carrier_only";
  }
  return "mixed";
}

FleetMode parse_fleet_mode(std::string_view s) {
  if (s == "mixed") return FleetMode::Mixed;
  if (s == "uav_only") return FleetMode::UavOnly;
  if (s == "carrier_only") return FleetMode::CarrierOnly;
  throw ConfigError("mode: expected mixed, uav_only or carrier_only, got '" + std::string(s) + "'");
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!network.from_files()) {
    require(network.grid.rows >= 1 && network.grid.cols >= 1, "network.grid", "rows and cols must be >= 1");
    require(network.grid.spacing_km > 0.0, "network.grid.spacing_km", "must be > 0");
    require(network.grid.tortuosity_max >= 1.0, "network.grid.tortuosity_max", "must be >= 1");
  } else {
    require(!network.edges_path.empty(), "network.edges", "required when network.nodes is set");
  }
  const auto& g = orders.generator;
  require(g.arrival_rate >= 0.0 && std::isfinite(g.arrival_rate), "orders.arrival_rate", "must be >= 0");
  require(g.demand_ratio >= 0.0 && std::isfinite(g.demand_ratio), "orders.demand_ratio", "must be >= 0");
  require(!g.count || *g.count >= 0, "orders.count", "must be >= 0");
  require(!g.count || *g.count == 0 || arrival_rate() > 0.0, "orders.arrival_rate",
          "must be > 0 when orders.count is positive");
  require(g.deadline_min >= 1, "orders.deadline_min", "must be >= 1");
  require(g.deadline_max >= g.deadline_min, "orders.deadline_max", "must be >= orders.deadline_min");
  if (!stations.from_file()) {
    require(stations.grid_rows >= 1 && stations.grid_cols >= 1, "stations.grid",
            "rows and cols must be >= 1");
  }
  require(fleet.n_uav >= 0 && fleet.n_carrier >= 0, "fleet", "vehicle counts must be >= 0");
  require(fleet.total() > 0, "fleet", "n_uav + n_carrier must be > 0");
  require(fleet.uav_speed_kmh > 0.0, "fleet.uav_speed_kmh", "must be > 0");
  require(fleet.carrier_speed_kmh > 0.0, "fleet.carrier_speed_kmh", "must be > 0");
  require(fleet.uav_capacity_kwh > 0.0, "fleet.uav_capacity_kwh", "must be > 0");
  require(mode != FleetMode::UavOnly || fleet.n_carrier == 0, "fleet.n_carrier",
          "must be 0 in uav_only mode");
  require(mode != FleetMode::CarrierOnly || fleet.n_uav == 0, "fleet.n_uav",
          "must be 0 in carrier_only mode");
  require(t_max >= 1, "scenario.t_max", "must be >= 1");
  require(n_max >= 1, "scenario.n_max", "must be >= 1");
  energy.validate();
}

double ScenarioConfig::arrival_rate() const {
  const auto& g = orders.generator;
  if (g.demand_ratio > 0.0) return g.demand_ratio * fleet.total();
  return g.arrival_rate;
}

double ScenarioConfig::max_speed_kmh() const {
  double v = 0.0;
  if (fleet.n_uav > 0) v = std::max(v, fleet.uav_speed_kmh);
  if (fleet.n_carrier > 0) v = std::max(v, fleet.carrier_speed_kmh);
  return v > 0.0 ? v : std::max(fleet.uav_speed_kmh, fleet.carrier_speed_kmh);
}

void apply_mode(ScenarioConfig& config, FleetMode mode) {
  const int total = config.fleet.total();
  config.mode = mode;
  if (mode == FleetMode::UavOnly) {
    config.fleet.n_uav = total;
    config.fleet.n_carrier = 0;
  } else if (mode == FleetMode::CarrierOnly) {
    config.fleet.n_uav = 0;
    config.fleet.n_carrier = total;
  }
}

RoadNetwork generate_grid_network(const GridNetworkSpec& spec) {
  Rng rng(spec.seed);
  std::vector<std::pair<NodeId, Point>> nodes;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      nodes.emplace_back(static_cast<NodeId>(r * spec.cols + c),
                         Point{c * spec.spacing_km, r * spec.spacing_km});
    }
  }
  std::vector<RoadNetwork::Edge> edges;
  auto add = [&](NodeId a, NodeId b) {
    const double factor = rng.uniform(1.0, spec.tortuosity_max);
    edges.push_back({a, b, spec.spacing_km * factor, true});
  };
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const NodeId id = r * spec.cols + c;
      if (c + 1 < spec.cols) add(id, id + 1);
      if (r + 1 < spec.rows) add(id, id + spec.cols);
    }
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

std::vector<ChargingStation> generate_grid_stations(const RoadNetwork& net, int rows, int cols) {
  const auto& b = net.bounds();
  std::vector<ChargingStation> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out.push_back({static_cast<std::int64_t>(r * cols + c),
                     {b.min_x + b.width() * (c + 0.5) / cols, b.min_y + b.height() * (r + 0.5) / rows}});
    }
  }
  return out;
}

std::vector<Order> generate_orders(const RoadNetwork& net, const OrderGeneratorSpec& spec,
                                   double arrival_rate, int t_max, std::uint64_t seed) {
  Rng rng(seed);
  const auto& b = net.bounds();
  const auto& ids = net.node_ids();
  auto random_node = [&] {
    return nearest_node(net, {rng.uniform(b.min_x, b.max_x), rng.uniform(b.min_y, b.max_y)});
  };
  std::vector<Order> out;
  auto emit = [&](int release) {
    Order o;
    o.id = static_cast<OrderId>(out.size());
    o.origin = random_node();
    o.destination = random_node();
    if (spec.distinct_endpoints && ids.size() > 1) {
      for (int tries = 0; o.destination == o.origin && tries < 64; ++tries) {
        o.destination = random_node();
      }
      while (o.destination == o.origin) {
        o.destination = ids[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(ids.size()) - 1))];
      }
    }
    o.release_time = release;
    o.deadline = release + static_cast<int>(rng.uniform_int(spec.deadline_min, spec.deadline_max));
    out.push_back(o);
  };

  if (spec.count) {
    // Exponential gaps; releases past the horizon pile up on its last step so
    // the requested count is always honored.
    double t = 0.0;
    for (int i = 0; i < *spec.count; ++i) {
      t += rng.exponential(arrival_rate);
      emit(std::min(static_cast<int>(std::floor(t)), t_max - 1));
    }
  } else {
    for (int step = 0; step < t_max; ++step) {
      const auto k = rng.poisson(arrival_rate);
      for (std::int64_t i = 0; i < k; ++i) emit(step);
    }
  }
  return out;
}

Scenario load_scenario(const ScenarioConfig& config) {
  config.validate();
  Scenario s;
  s.config = config;
  if (config.network.from_files()) {
    s.net = std::make_shared<const RoadNetwork>(
        load_road_network(config.network.nodes_path, config.network.edges_path));
  } else {
    s.net = std::make_shared<const RoadNetwork>(generate_grid_network(config.network.grid));
  }
  s.stations = config.stations.from_file()
                   ? load_stations(config.stations.path)
                   : generate_grid_stations(*s.net, config.stations.grid_rows,
                                            config.stations.grid_cols);
  if (config.fleet.n_uav > 0 && s.stations.empty()) {
    throw ConfigError("stations: UAVs need at least one charging station");
  }
  if (config.orders.from_file()) {
    auto orders = load_orders(config.orders.path);
    for (const auto& o : orders) {
      if (!s.net->has_node(o.origin) || !s.net->has_node(o.destination)) {
        throw InputError(config.orders.path + ": order " + std::to_string(o.id) +
                         " references a node outside the network");
      }
    }
    s.file_orders = std::move(orders);
  }
  return s;
}

WorldState make_world(const Scenario& scenario, std::uint64_t seed) {
  const auto& cfg = scenario.config;
  WorldState w(*scenario.net);
  w.t_max = cfg.t_max;
  w.order_capacity = cfg.n_max;
  w.orders = scenario.file_orders
                 ? *scenario.file_orders
                 : generate_orders(*scenario.net, cfg.orders.generator, cfg.arrival_rate(),
                                   cfg.t_max, derive_seed(seed, 1));
  w.stations = scenario.stations;
  if (cfg.fleet.n_uav > 0 && w.stations.empty()) {
    throw ConfigError("stations: UAVs need at least one charging station");
  }
  for (int i = 0; i < cfg.fleet.n_uav; ++i) {
    Uav u;
    u.id = i;
    u.location = w.stations[static_cast<std::size_t>(i) % w.stations.size()].location;
    u.speed_kmh = cfg.fleet.uav_speed_kmh;
    u.battery_capacity_kwh = cfg.fleet.uav_capacity_kwh;
    w.uavs.push_back(u);
  }
  Rng rng(derive_seed(seed, 2));
  const auto& ids = scenario.net->node_ids();
  for (int i = 0; i < cfg.fleet.n_carrier; ++i) {
    Carrier c;
    c.id = i;
    c.location_node =
        ids[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ids.size()) - 1))];
    c.speed_kmh = cfg.fleet.carrier_speed_kmh;
    w.carriers.push_back(c);
  }
  refresh_stats(w, w.order_capacity);
  return w;
}

}  // namespace airground
