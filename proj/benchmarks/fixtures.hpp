#pragma once

#include "airground/feasibility.hpp"
#include "airground/rng.hpp"
#include "airground/scenario.hpp"

namespace airground::bench {

/// World on a side x side grid with `orders` active orders and an even
/// UAV/carrier split of `vehicles`.
inline WorldState dispatch_world(int side, int orders, int vehicles, std::uint64_t seed = 1) {
  ScenarioConfig cfg;
  cfg.network.grid = {side, side, 2.0, 1.3, 11};
  cfg.fleet.n_uav = vehicles / 2;
  cfg.fleet.n_carrier = vehicles - vehicles / 2;
  cfg.n_max = orders;
  cfg.t_max = 200;
  auto world = make_world(load_scenario(cfg), seed);
  Rng rng(seed);
  const auto& ids = world.net.node_ids();
  const auto last = static_cast<std::int64_t>(ids.size()) - 1;
  world.orders.clear();
  for (int i = 0; i < orders; ++i) {
    const auto o = ids[static_cast<std::size_t>(rng.uniform_int(0, last))];
    auto d = o;
    while (d == o) d = ids[static_cast<std::size_t>(rng.uniform_int(0, last))];
    world.orders.push_back({i, o, d, 0, static_cast<int>(rng.uniform_int(30, 120))});
  }
  return world;
}

inline FeasibilityMask random_mask(Rng& rng, int rows, int cols, double density) {
  std::vector<OrderId> orders(rows);
  std::vector<VehicleId> uavs(cols / 2), carriers(cols - cols / 2);
  for (int i = 0; i < rows; ++i) orders[i] = i;
  for (std::size_t i = 0; i < uavs.size(); ++i) uavs[i] = static_cast<VehicleId>(i);
  for (std::size_t i = 0; i < carriers.size(); ++i) carriers[i] = static_cast<VehicleId>(i);
  auto m = FeasibilityMask::empty(orders, uavs, carriers);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m.set(r, c, rng.uniform(0, 1) < density);
  return m;
}

}  // namespace airground::bench
