#include "helpers.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace airground::testing {

RoadNetwork line_network(int n, double spacing_km) {
  std::vector<std::pair<NodeId, Point>> nodes;
  std::vector<RoadNetwork::Edge> edges;
  for (int i = 0; i < n; ++i) {
    nodes.emplace_back(i, Point{i * spacing_km, 0.0});
    if (i > 0) edges.push_back({i - 1, i, spacing_km, true});
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

RoadNetwork random_network(Rng& rng, int n, double edge_prob) {
  std::vector<std::pair<NodeId, Point>> nodes;
  for (int i = 0; i < n; ++i) {
    nodes.emplace_back(100 + 7 * i, Point{rng.uniform(0, 10), rng.uniform(0, 10)});
  }
  std::vector<RoadNetwork::Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || rng.uniform01() >= edge_prob) continue;
      const double d = euclidean_distance(nodes[i].second, nodes[j].second);
      edges.push_back({nodes[i].first, nodes[j].first, d * rng.uniform(1.0, 1.5), rng.uniform01() < 0.5});
    }
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

FeasibilityMask random_mask(Rng& rng, int rows, int n_uav, int n_carrier, double density) {
  std::vector<OrderId> orders;
  std::vector<VehicleId> uavs, carriers;
  for (int i = 0; i < rows; ++i) orders.push_back(i);
  for (int i = 0; i < n_uav; ++i) uavs.push_back(i);
  for (int i = 0; i < n_carrier; ++i) carriers.push_back(i);
  auto m = FeasibilityMask::empty(orders, uavs, carriers);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) m.set(r, c, rng.uniform01() < density);
  }
  return m;
}

std::size_t brute_force_matching_size(const FeasibilityMask& mask) {
  std::vector<bool> used(mask.cols(), false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t r) -> std::size_t {
    if (r == mask.rows()) return 0;
    std::size_t best = go(r + 1);
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (!mask.at(r, c) || used[c]) continue;
      used[c] = true;
      best = std::max(best, 1 + go(r + 1));
      used[c] = false;
    }
    return best;
  };
  return go(0);
}

ScenarioConfig tiny_config() {
  ScenarioConfig c;
  c.network.grid = {4, 5, 2.0, 1.3, 7};
  c.orders.generator.arrival_rate = 0.6;
  c.stations.grid_rows = 2;
  c.stations.grid_cols = 2;
  c.fleet.n_uav = 3;
  c.fleet.n_carrier = 3;
  c.t_max = 30;
  c.n_max = 8;
  return c;
}

WorldState empty_world(const RoadNetwork& net, std::vector<ChargingStation> stations) {
  WorldState w(net);
  w.stations = std::move(stations);
  return w;
}

GlobalState random_global_state(Rng& rng, const Caps& caps, double order_fill, double vehicle_fill,
                                double pair_density) {
  GlobalState gs;
  gs.caps = caps;
  const int m = caps.vehicles();
  gs.order_seg.assign(static_cast<std::size_t>(caps.n_max) * kOrderFeatures, 0.0);
  gs.uav_seg.assign(static_cast<std::size_t>(caps.n_uav) * kUavFeatures, 0.0);
  gs.carrier_seg.assign(static_cast<std::size_t>(caps.n_carrier) * kCarrierFeatures, 0.0);
  gs.valid_order.assign(caps.n_max, 0);
  gs.order_ids.assign(caps.n_max, -1);
  gs.uav_ids.assign(caps.n_uav, -1);
  gs.carrier_ids.assign(caps.n_carrier, -1);
  gs.pair_valid.assign(static_cast<std::size_t>(caps.n_max) * m, 0);
  gs.pair_feat.assign(static_cast<std::size_t>(caps.n_max) * m * kPairFeatures, 0.0);
  int next_order = 0;
  for (int s = 0; s < caps.n_max; ++s) {
    if (rng.uniform01() >= order_fill && s > 0) continue;
    gs.valid_order[s] = 1;
    gs.order_ids[s] = next_order++;
    for (int f = 0; f < kOrderFeatures; ++f) gs.order_seg[s * kOrderFeatures + f] = rng.uniform01();
  }
  for (int i = 0; i < caps.n_uav; ++i) {
    if (rng.uniform01() >= vehicle_fill && i > 0) continue;
    gs.uav_ids[i] = i;
    for (int f = 0; f < kUavFeatures; ++f) gs.uav_seg[i * kUavFeatures + f] = rng.uniform01();
  }
  for (int i = 0; i < caps.n_carrier; ++i) {
    if (rng.uniform01() >= vehicle_fill && i > 0) continue;
    gs.carrier_ids[i] = i;
    for (int f = 0; f < kCarrierFeatures; ++f) {
      gs.carrier_seg[i * kCarrierFeatures + f] = rng.uniform01();
    }
  }
  for (auto& v : gs.sys_seg) v = rng.uniform01();
  for (int s = 0; s < caps.n_max; ++s) {
    if (!gs.valid_order[s]) continue;
    for (int v = 0; v < m; ++v) {
      const bool present = v < caps.n_uav ? gs.uav_ids[v] >= 0 : gs.carrier_ids[v - caps.n_uav] >= 0;
      if (!present || rng.uniform01() >= pair_density) continue;
      const auto idx = gs.pair_index(s, v);
      gs.pair_valid[idx] = 1;
      for (int f = 0; f < kPairFeatures; ++f) gs.pair_feat[idx * kPairFeatures + f] = rng.uniform01();
    }
  }
  return gs;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("airground_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace airground::testing
