#include "airground/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "airground/errors.hpp"

namespace airground {

namespace {

constexpr double kKmEps = 1e-9;

bool vehicle_busy(const WorldState& state, VehicleRef v) {
  return std::any_of(state.active_missions.begin(), state.active_missions.end(),
                     [&](const Mission& m) { return m.vehicle == v; });
}

void set_route(Mission& m, std::vector<Point> route, std::vector<double> cum) {
  m.route = std::move(route);
  m.route_cum_km = std::move(cum);
  m.total_km = m.route_cum_km.back();
  m.segment = 0;
  m.travelled_km = 0.0;
}

Mission uav_mission(const WorldState& state, const Uav& u, const Order& o) {
  const Point origin = state.net.point(o.origin);
  const Point dest = state.net.point(o.destination);
  const double d1 = euclidean_distance(u.location, origin);
  const double d2 = euclidean_distance(origin, dest);
  Mission m;
  m.vehicle = {VehicleKind::Uav, u.id};
  m.order_id = o.id;
  set_route(m, {u.location, origin, dest}, {0.0, d1, d1 + d2});
  m.pickup_km = d1;
  m.legs = {{origin, std::nullopt, state.clock + travel_steps(d1, u.speed_kmh)},
            {dest, std::nullopt, state.clock + travel_steps(d1 + d2, u.speed_kmh)}};
  return m;
}

Mission carrier_mission(const WorldState& state, const Carrier& c, const Order& o) {
  const auto first = state.net.path(c.location_node, o.origin);
  const auto second = state.net.path(o.origin, o.destination);
  if (first.empty() || second.empty()) {
    throw ContractViolation("carrier " + std::to_string(c.id) + " cannot reach order " +
                            std::to_string(o.id) + " by road");
  }
  // Prefix lengths of a shortest path are shortest distances from its source.
  std::vector<NodeId> nodes;
  std::vector<double> cum;
  for (const NodeId n : first) {
    nodes.push_back(n);
    cum.push_back(*state.net.distance(c.location_node, n));
  }
  const double d1 = cum.back();
  for (std::size_t i = 1; i < second.size(); ++i) {
    nodes.push_back(second[i]);
    cum.push_back(d1 + *state.net.distance(o.origin, second[i]));
  }
  std::vector<Point> pts;
  for (const NodeId n : nodes) pts.push_back(state.net.point(n));

  Mission m;
  m.vehicle = {VehicleKind::Carrier, c.id};
  m.order_id = o.id;
  set_route(m, std::move(pts), std::move(cum));
  m.route_nodes = std::move(nodes);
  m.pickup_km = d1;
  m.legs = {{state.net.point(o.origin), o.origin, state.clock + travel_steps(d1, c.speed_kmh)},
            {state.net.point(o.destination), o.destination,
             state.clock + travel_steps(m.total_km, c.speed_kmh)}};
  return m;
}

Mission charge_mission(const WorldState& state, const Uav& u) {
  const auto& station = state.stations[nearest_station(state.stations, u.location)];
  const double d = euclidean_distance(u.location, station.location);
  Mission m;
  m.vehicle = {VehicleKind::Uav, u.id};
  m.order_id = -1;
  m.phase = MissionPhase::ToCharge;
  set_route(m, {u.location, station.location}, {0.0, d});
  m.legs = {{station.location, std::nullopt, state.clock + 1 + travel_steps(d, u.speed_kmh)}};
  m.charging_at_station = d <= kKmEps;
  return m;
}

Point point_along(const Mission& m) {
  std::size_t s = m.segment;
  while (s + 1 < m.route.size() && m.route_cum_km[s + 1] <= m.travelled_km) ++s;
  if (s + 1 >= m.route.size()) return m.route.back();
  const double len = m.route_cum_km[s + 1] - m.route_cum_km[s];
  const double f = len > 0.0 ? (m.travelled_km - m.route_cum_km[s]) / len : 0.0;
  const Point a = m.route[s];
  const Point b = m.route[s + 1];
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
}

void sync_segment(Mission& m) {
  while (m.segment + 1 < m.route.size() && m.route_cum_km[m.segment + 1] <= m.travelled_km + kKmEps) {
    ++m.segment;
  }
}

}  // namespace

StepReport advance_world(WorldState& state, const Assignment& new_assignments,
                         const EnergyModel& em, TraceWriter* trace) {
  StepReport report;
  report.clock = state.clock;

  for (const auto& p : new_assignments.pairs) {
    Order& order = state.order(p.order_id);
    const bool active = order.status == OrderStatus::Pending &&
                        order.release_time <= state.clock && order.deadline > state.clock;
    if (!active) {
      throw ContractViolation("order " + std::to_string(order.id) + " is not open for dispatch");
    }
    if (vehicle_busy(state, p.vehicle)) {
      throw ContractViolation(std::string(to_string(p.vehicle.kind)) + " " +
                              std::to_string(p.vehicle.id) + " already has a mission");
    }
    if (p.vehicle.kind == VehicleKind::Uav) {
      Uav& u = state.uav(p.vehicle.id);
      if (u.status != UavStatus::Idle) {
        throw ContractViolation("uav " + std::to_string(u.id) + " is busy");
      }
      state.active_missions.push_back(uav_mission(state, u, order));
      u.status = UavStatus::Serving;
      u.available = false;
      ++state.counters.uav_missions;
    } else {
      Carrier& c = state.carrier(p.vehicle.id);
      if (c.status != CarrierStatus::Idle) {
        throw ContractViolation("carrier " + std::to_string(c.id) + " is busy");
      }
      state.active_missions.push_back(carrier_mission(state, c, order));
      c.status = CarrierStatus::Serving;
      c.available = false;
    }
    advance_status(order, OrderStatus::Matched);
    ++state.counters.matched;
    ++report.n_matched;
    if (trace) trace->order_event(state.clock, order.id, OrderStatus::Matched);
  }

  std::sort(state.active_missions.begin(), state.active_missions.end(),
            [](const Mission& a, const Mission& b) { return a.vehicle < b.vehicle; });

  const int arrival_clock = state.clock + 1;
  std::vector<Mission> follow_ups;
  std::vector<Mission> still_active;
  for (auto& m : state.active_missions) {
    const bool is_uav = m.vehicle.kind == VehicleKind::Uav;

    if (m.phase == MissionPhase::ToCharge && m.charging_at_station) {
      Uav& u = state.uav(m.vehicle.id);
      u.battery = std::min(1.0, u.battery + em.recharge_rate);
      if (u.battery >= 1.0) {
        u.status = UavStatus::Idle;
        u.available = true;
      } else {
        still_active.push_back(std::move(m));
      }
      continue;
    }

    const double speed = is_uav ? state.uav(m.vehicle.id).speed_kmh
                                : state.carrier(m.vehicle.id).speed_kmh;
    double next = m.travelled_km + km_per_step(speed);
    if (next >= m.total_km - kKmEps) next = m.total_km;
    const double moved = next - m.travelled_km;
    m.travelled_km = next;
    sync_segment(m);

    if (is_uav) {
      Uav& u = state.uav(m.vehicle.id);
      u.location = point_along(m);
      u.battery -= em.eta_kwh_per_km * moved / u.battery_capacity_kwh;
      if (u.battery < 0.0) {
        if (u.battery < -1e-9) ++state.counters.battery_underflows;
        u.battery = 0.0;
      }
    } else {
      state.carrier(m.vehicle.id).location_node = m.route_nodes[m.segment];
    }

    if (m.phase == MissionPhase::ToCharge) {
      if (m.travelled_km >= m.total_km) {
        m.charging_at_station = true;
        state.uav(m.vehicle.id).location = m.route.back();
      }
      still_active.push_back(std::move(m));
      continue;
    }

    Order& order = state.order(m.order_id);
    if (m.phase == MissionPhase::ToPickup && m.travelled_km >= m.pickup_km - kKmEps) {
      advance_status(order, OrderStatus::PickedUp);
      m.phase = MissionPhase::ToDelivery;
      ++state.counters.picked;
      ++report.n_picked;
      if (trace) trace->order_event(state.clock, order.id, OrderStatus::PickedUp);
    }
    if (m.phase == MissionPhase::ToDelivery && m.travelled_km >= m.total_km) {
      advance_status(order, OrderStatus::Delivered);
      ++state.counters.delivered;
      ++report.n_delivered;
      const bool late = arrival_clock > order.deadline;
      if (late) {
        ++state.counters.failed_deliveries;
        ++report.n_failed_deliveries;
      }
      if (trace) trace->order_event(state.clock, order.id, OrderStatus::Delivered);
      if (is_uav) {
        Uav& u = state.uav(m.vehicle.id);
        ++state.counters.delivered_uav;
        ++report.n_delivered_uav;
        if (late) ++state.counters.uav_late_deliveries;
        u.location = m.route.back();
        if (u.battery < em.charge_threshold) {
          u.status = UavStatus::Charging;
          u.available = false;
          ++state.counters.charge_trips;
          follow_ups.push_back(charge_mission(state, u));
        } else {
          u.status = UavStatus::Idle;
          u.available = true;
        }
      } else {
        Carrier& c = state.carrier(m.vehicle.id);
        ++state.counters.delivered_carrier;
        ++report.n_delivered_carrier;
        c.location_node = m.route_nodes.back();
        c.status = CarrierStatus::Idle;
        c.available = true;
      }
      continue;
    }
    still_active.push_back(std::move(m));
  }
  for (auto& m : follow_ups) still_active.push_back(std::move(m));
  std::sort(still_active.begin(), still_active.end(),
            [](const Mission& a, const Mission& b) { return a.vehicle < b.vehicle; });
  state.active_missions = std::move(still_active);

  state.clock = arrival_clock;
  refresh_stats(state, state.order_capacity);
  return report;
}

int count_stranded_uavs(const WorldState& state, const EnergyModel& em) {
  if (state.stations.empty()) return 0;
  int n = 0;
  for (const auto& u : state.uavs) {
    if (u.status != UavStatus::Idle) continue;
    const auto& s = state.stations[nearest_station(state.stations, u.location)];
    const double need = em.eta_kwh_per_km * euclidean_distance(u.location, s.location);
    if (u.energy_kwh() < need - 1e-9) ++n;
  }
  return n;
}

Engine::Engine(std::shared_ptr<const Scenario> scenario, EngineOptions options)
    : scenario_(std::move(scenario)), options_(options) {
  if (!scenario_) throw ContractViolation("engine needs a scenario");
}

void Engine::reset(std::uint64_t seed) {
  state_.emplace(make_world(*scenario_, seed));
  mask_ = {};
  last_decision_ = {};
  prepared_ = false;
  pending_expired_ = 0;
  prepare_seconds_ = 0.0;
  reports_.clear();
  stranded_ = 0;
}

const FeasibilityMask& Engine::prepare() {
  if (!state_) throw ContractViolation("engine used before reset()");
  if (prepared_) return mask_;
  auto& state = *state_;
  std::vector<OrderId> overdue;
  if (options_.trace) {
    for (const auto& o : state.orders) {
      if (o.status == OrderStatus::Pending && o.deadline <= state.clock) overdue.push_back(o.id);
    }
  }
  pending_expired_ = expire_orders(state);
  for (const auto id : overdue) options_.trace->order_event(state.clock, id, OrderStatus::Expired);
  refresh_stats(state, state.order_capacity);

  const auto t0 = std::chrono::steady_clock::now();
  mask_ = build_mask(state, scenario_->config.energy, static_cast<std::size_t>(state.order_capacity));
  prepare_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  prepared_ = true;
  return mask_;
}

StepReport Engine::step(DispatchPolicy& policy) {
  prepare();
  auto& state = *state_;
  const auto t0 = std::chrono::steady_clock::now();
  last_decision_ = policy.decide(state, mask_);
  const double decide_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  validate_assignment(last_decision_.assignment, mask_);

  if (options_.trace) {
    options_.trace->dispatch(state.clock, last_decision_.assignment,
                             last_decision_.scores ? &*last_decision_.scores : nullptr,
                             last_decision_.goals.empty() ? nullptr : &last_decision_.goals);
  }
  auto report = advance_world(state, last_decision_.assignment, scenario_->config.energy,
                              options_.trace);
  report.n_expired = pending_expired_;
  report.dispatch_wall_time = options_.measure_time ? prepare_seconds_ + decide_seconds : 0.0;
  stranded_ += count_stranded_uavs(state, scenario_->config.energy);
  if (options_.trace) {
    options_.trace->step(report);
    options_.trace->vehicles(state);
  }
  reports_.push_back(report);
  prepared_ = false;
  return report;
}

EpisodeMetrics Engine::metrics() const {
  EpisodeMetrics m;
  if (!state_) return m;
  const auto& c = state_->counters;
  m.pn = c.picked;
  m.dn = c.delivered;
  m.matched = c.matched;
  m.dn_uav = c.delivered_uav;
  m.dn_carrier = c.delivered_carrier;
  m.battery_violations = c.battery_underflows;
  m.stranded_uavs = stranded_;
  double total = 0.0;
  for (const auto& r : reports_) total += r.dispatch_wall_time;
  m.mean_et = reports_.empty() ? 0.0 : total / static_cast<double>(reports_.size());
  m.step_reports = reports_;
  return m;
}

EpisodeMetrics run_episode(std::shared_ptr<const Scenario> scenario, DispatchPolicy& policy,
                           std::uint64_t seed, EngineOptions options) {
  Engine engine(std::move(scenario), options);
  engine.reset(seed);
  policy.begin_episode(seed);
  while (!engine.done()) engine.step(policy);
  return engine.metrics();
}

EpisodeMetrics run_episode(const ScenarioConfig& config, DispatchPolicy& policy,
                           std::uint64_t seed, EngineOptions options) {
  auto scenario = std::make_shared<const Scenario>(load_scenario(config));
  return run_episode(std::move(scenario), policy, seed, options);
}

}  // namespace airground
