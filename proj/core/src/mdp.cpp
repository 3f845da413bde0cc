#include "airground/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "airground/errors.hpp"

namespace airground {

namespace {

double unit(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Normalizer Normalizer::for_world(const WorldState& state, double max_speed_kmh) {
  Normalizer n;
  n.bounds = state.net.bounds();
  // Road detours can exceed the straight-line extent; twice the diagonal
  // keeps typical distances inside the unit range.
  n.distance_scale = std::max(2.0 * n.bounds.diagonal(), 1e-9);
  n.t_max = std::max(1, state.t_max);
  n.max_speed_kmh = max_speed_kmh > 0.0 ? max_speed_kmh : 1.0;
  return n;
}

double Normalizer::nx(double x) const {
  const double w = bounds.width();
  return w > 0.0 ? unit((x - bounds.min_x) / w) : 0.0;
}

double Normalizer::ny(double y) const {
  const double h = bounds.height();
  return h > 0.0 ? unit((y - bounds.min_y) / h) : 0.0;
}

int GlobalState::active_orders() const {
  return static_cast<int>(std::count(valid_order.begin(), valid_order.end(), std::uint8_t{1}));
}

GlobalState encode_state(const WorldState& state, const Caps& caps, const Normalizer& norm,
                         const FeasibilityMask* mask, const EnergyModel* em) {
  if (static_cast<int>(state.uavs.size()) > caps.n_uav ||
      static_cast<int>(state.carriers.size()) > caps.n_carrier) {
    throw ContractViolation("fleet larger than the encoder caps");
  }
  const EnergyModel energy = em ? *em : EnergyModel{};
  const int m = caps.vehicles();
  GlobalState gs;
  gs.caps = caps;
  gs.order_seg.assign(static_cast<std::size_t>(caps.n_max) * kOrderFeatures, 0.0);
  gs.uav_seg.assign(static_cast<std::size_t>(caps.n_uav) * kUavFeatures, 0.0);
  gs.carrier_seg.assign(static_cast<std::size_t>(caps.n_carrier) * kCarrierFeatures, 0.0);
  gs.valid_order.assign(caps.n_max, 0);
  gs.order_ids.assign(caps.n_max, -1);
  gs.uav_ids.assign(caps.n_uav, -1);
  gs.carrier_ids.assign(caps.n_carrier, -1);
  gs.pair_valid.assign(static_cast<std::size_t>(caps.n_max) * m, 0);
  gs.pair_feat.assign(static_cast<std::size_t>(caps.n_max) * m * kPairFeatures, 0.0);

  std::vector<Order> slots;
  if (mask) {
    for (const auto id : mask->orders) slots.push_back(state.order(id));
  } else {
    slots = active_orders(state);
  }
  std::sort(slots.begin(), slots.end(), [](const Order& a, const Order& b) {
    return a.deadline != b.deadline ? a.deadline < b.deadline : a.id < b.id;
  });
  if (static_cast<int>(slots.size()) > caps.n_max) slots.resize(caps.n_max);

  for (std::size_t s = 0; s < slots.size(); ++s) {
    const Order& o = slots[s];
    const Point a = state.net.point(o.origin);
    const Point b = state.net.point(o.destination);
    double* f = &gs.order_seg[s * kOrderFeatures];
    f[0] = norm.nx(a.x);
    f[1] = norm.ny(a.y);
    f[2] = norm.nx(b.x);
    f[3] = norm.ny(b.y);
    f[4] = unit(o.release_time / norm.t_max);
    f[5] = unit(o.deadline / norm.t_max);
    gs.valid_order[s] = 1;
    gs.order_ids[s] = o.id;
  }
  for (std::size_t i = 0; i < state.uavs.size(); ++i) {
    const Uav& u = state.uavs[i];
    double* f = &gs.uav_seg[i * kUavFeatures];
    f[0] = norm.nx(u.location.x);
    f[1] = norm.ny(u.location.y);
    f[2] = unit(u.speed_kmh / norm.max_speed_kmh);
    f[3] = u.status == UavStatus::Idle ? 1.0 : 0.0;
    f[4] = unit(u.battery);
    gs.uav_ids[i] = u.id;
  }
  for (std::size_t i = 0; i < state.carriers.size(); ++i) {
    const Carrier& c = state.carriers[i];
    const Point p = state.net.point(c.location_node);
    double* f = &gs.carrier_seg[i * kCarrierFeatures];
    f[0] = norm.nx(p.x);
    f[1] = norm.ny(p.y);
    f[2] = unit(c.speed_kmh / norm.max_speed_kmh);
    f[3] = c.status == CarrierStatus::Idle ? 1.0 : 0.0;
    gs.carrier_ids[i] = c.id;
  }
  const auto sys = state.stats.as_array();
  for (int k = 0; k < kSysFeatures; ++k) gs.sys_seg[k] = unit(sys[k]);

  if (!mask) return gs;

  const std::size_t n_uav_cols = mask->uav_cols.size();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const Order& o = slots[s];
    const auto row_it = std::find(mask->orders.begin(), mask->orders.end(), o.id);
    const auto r = static_cast<std::size_t>(row_it - mask->orders.begin());
    const Point origin = state.net.point(o.origin);
    const Point dest = state.net.point(o.destination);
    for (std::size_t c = 0; c < mask->cols(); ++c) {
      if (!mask->at(r, c)) continue;
      double approach = 0.0;
      double od = 0.0;
      double speed = 1.0;
      double margin = 0.0;
      int col = 0;
      if (c < n_uav_cols) {
        const auto id = mask->uav_cols[c];
        col = static_cast<int>(std::find(gs.uav_ids.begin(), gs.uav_ids.end(), id) - gs.uav_ids.begin());
        const Uav& u = state.uav(id);
        approach = euclidean_distance(u.location, origin);
        od = euclidean_distance(origin, dest);
        speed = u.speed_kmh;
        const double need =
            safe_return_energy_kwh(u.location, origin, dest, state.stations, energy);
        margin = unit((u.energy_kwh() - need) / u.battery_capacity_kwh);
      } else {
        const auto id = mask->carrier_cols[c - n_uav_cols];
        col = caps.n_uav + static_cast<int>(std::find(gs.carrier_ids.begin(), gs.carrier_ids.end(), id) -
                                            gs.carrier_ids.begin());
        const Carrier& v = state.carrier(id);
        approach = state.net.distance(v.location_node, o.origin).value_or(0.0);
        od = state.net.distance(o.origin, o.destination).value_or(0.0);
        speed = v.speed_kmh;
      }
      const double slack = o.deadline - state.clock - travel_steps(approach + od, speed);
      const auto idx = gs.pair_index(static_cast<int>(s), col);
      gs.pair_valid[idx] = 1;
      double* f = &gs.pair_feat[idx * kPairFeatures];
      f[0] = unit(approach / norm.distance_scale);
      f[1] = unit(od / norm.distance_scale);
      f[2] = unit(slack / norm.t_max);
      f[3] = margin;
    }
  }
  return gs;
}

void RewardWeights::validate() const {
  const double all[] = {lambda_m, lambda_p, lambda_d, lambda_t, lambda_r, alpha};
  for (const double v : all) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("rewards: weights must be finite and >= 0");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("rewards.gamma: must lie in (0, 1)");
}

double extrinsic_reward(const StepReport& report, int cum_matched, int clock,
                        const RewardWeights& w, int t_max) {
  if (!w.shaping) return w.lambda_d * report.n_delivered;
  const double nm = report.n_matched;
  const double np = report.n_picked;
  const double nd = report.n_delivered;
  const double rate = (np + nd) / std::max(cum_matched, 1);
  const double decay = 1.0 - static_cast<double>(clock) / t_max;
  return w.lambda_m * nm + w.lambda_p * np + w.lambda_d * nd + w.lambda_r * rate + w.lambda_t * decay;
}

VehicleKind goal_mode(const std::array<double, 2>& goal) {
  return goal[0] > 0.5 ? VehicleKind::Uav : VehicleKind::Carrier;
}

double intrinsic_reward(const GoalMap& goals, const Assignment& executed, const RewardWeights& w) {
  if (executed.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : executed.pairs) {
    const auto it = goals.find(p.order_id);
    if (it == goals.end()) {
      throw ContractViolation("no manager goal for executed order " + std::to_string(p.order_id));
    }
    sum += goal_mode(it->second) == p.vehicle.kind ? 1.0 : -1.0;
  }
  return w.normalize_intrinsic ? sum / static_cast<double>(executed.size()) : sum;
}

double hybrid_reward(double r_ex, double r_in, const RewardWeights& w) { return r_ex + w.alpha * r_in; }

}  // namespace airground
