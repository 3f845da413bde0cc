#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "airground/assignment.hpp"
#include "airground/mdp.hpp"
#include "airground/rng.hpp"
#include "airground/scenario.hpp"
#include "airground/world.hpp"

namespace airground::testing {

/// Straight chain 0 - 1 - ... - (n-1) along the x axis.
RoadNetwork line_network(int n, double spacing_km = 1.0);

/// Random graph with arbitrary (non-contiguous) ids; some edges one-way.
RoadNetwork random_network(Rng& rng, int n, double edge_prob);

/// Mask with ascending vehicle ids 0..n-1 per kind and order ids 0..rows-1.
FeasibilityMask random_mask(Rng& rng, int rows, int n_uav, int n_carrier, double density);

/// Size of a maximum one-to-one matching by exhaustive search.
std::size_t brute_force_matching_size(const FeasibilityMask& mask);

/// A small mixed scenario on a 4 x 5 grid, fast enough for unit tests.
ScenarioConfig tiny_config();

/// World at clock 0 with hand-placed entities; no orders.
WorldState empty_world(const RoadNetwork& net, std::vector<ChargingStation> stations);

/// Random GlobalState with features in [0, 1] and random flags.
GlobalState random_global_state(Rng& rng, const Caps& caps, double order_fill = 0.7,
                                double vehicle_fill = 0.8, double pair_density = 0.6);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

std::string read_file(const std::filesystem::path& p);

}  // namespace airground::testing
