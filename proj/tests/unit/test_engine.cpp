#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "airground/engine.hpp"
#include "airground/errors.hpp"
#include "airground/policy.hpp"
#include "helpers.hpp"

using namespace airground;
using airground::testing::line_network;
using airground::testing::tiny_config;

namespace {

Assignment single(OrderId o, VehicleKind k, VehicleId v) { return {{{o, {k, v}}}}; }

/// Checks conservation and exclusivity after every step.
class AuditingPolicy : public DispatchPolicy {
 public:
  explicit AuditingPolicy(DispatchPolicy& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  void begin_episode(std::uint64_t seed) override { inner_.begin_episode(seed); }
  Decision decide(const WorldState& state, const FeasibilityMask& mask) override {
    std::set<VehicleRef> busy;
    for (const auto& m : state.active_missions) {
      EXPECT_TRUE(busy.insert(m.vehicle).second) << "two missions for one vehicle";
    }
    std::map<OrderStatus, int> by_status;
    for (const auto& o : state.orders) ++by_status[o.status];
    const auto& c = state.counters;
    EXPECT_EQ(by_status[OrderStatus::Delivered], c.delivered);
    EXPECT_EQ(by_status[OrderStatus::Expired], c.expired);
    EXPECT_EQ(by_status[OrderStatus::Matched] + by_status[OrderStatus::PickedUp] + c.delivered, c.matched);
    EXPECT_EQ(by_status[OrderStatus::PickedUp] + c.delivered, c.picked);
    for (const auto& u : state.uavs) {
      EXPECT_GE(u.battery, 0.0);
      EXPECT_LE(u.battery, 1.0);
    }
    for (std::size_t col = 0; col < mask.cols(); ++col) {
      const auto v = mask.column(col);
      for (std::size_t r = 0; r < mask.rows(); ++r) {
        if (mask.at(r, col)) EXPECT_FALSE(busy.count(v)) << "busy vehicle offered";
      }
    }
    ++steps;
    return inner_.decide(state, mask);
  }
  int steps = 0;

 private:
  DispatchPolicy& inner_;
};

std::string trace_of(const ScenarioConfig& cfg, DispatchPolicy& policy, std::uint64_t seed) {
  std::ostringstream out;
  TraceWriter tw(out);
  run_episode(cfg, policy, seed, {.measure_time = false, .trace = &tw});
  return out.str();
}

}  // namespace

TEST(Engine, UavMissionTimeline) {
  auto w = airground::testing::empty_world(line_network(6), {{0, {4, 0}}});
  w.t_max = 10;
  w.orders = {{0, 2, 4, 0, 10}};
  w.uavs = {Uav{.id = 0, .location = {0, 0}}};
  const EnergyModel em;
  auto r = advance_world(w, single(0, VehicleKind::Uav, 0), em);
  EXPECT_EQ(r.clock, 0);
  EXPECT_EQ(r.n_matched, 1);
  EXPECT_EQ(w.clock, 1);
  EXPECT_EQ(w.uavs[0].location, (Point{1, 0}));
  r = advance_world(w, {}, em);
  EXPECT_EQ(r.n_picked, 1);
  EXPECT_EQ(w.order(0).status, OrderStatus::PickedUp);
  advance_world(w, {}, em);
  r = advance_world(w, {}, em);
  EXPECT_EQ(r.clock, 3);
  EXPECT_EQ(r.n_delivered, 1);
  EXPECT_EQ(r.n_delivered_uav, 1);
  EXPECT_EQ(r.n_failed_deliveries, 0);
  EXPECT_EQ(w.uavs[0].status, UavStatus::Idle);
  EXPECT_NEAR(w.uavs[0].battery, 1.0 - 0.04, 1e-12);
  EXPECT_TRUE(w.active_missions.empty());
}

TEST(Engine, CarrierFollowsRoadNodes) {
  auto w = airground::testing::empty_world(line_network(6, 0.75), {{0, {0, 0}}});
  w.orders = {{0, 1, 3, 0, 10}};
  w.carriers = {Carrier{.id = 0, .location_node = 0}};
  const EnergyModel em;
  advance_world(w, single(0, VehicleKind::Carrier, 0), em);
  EXPECT_EQ(w.carriers[0].location_node, 1);
  EXPECT_EQ(w.order(0).status, OrderStatus::PickedUp);
  advance_world(w, {}, em);
  auto r = advance_world(w, {}, em);
  EXPECT_EQ(r.n_delivered_carrier, 1);
  EXPECT_EQ(w.carriers[0].location_node, 3);
  EXPECT_EQ(w.carriers[0].status, CarrierStatus::Idle);
}

TEST(Engine, LowBatteryTriggersChargeTripAndRecharge) {
  auto w = airground::testing::empty_world(line_network(4), {{0, {0, 0}}});
  w.t_max = 200;
  w.orders = {{0, 0, 1, 0, 10}};
  w.uavs = {Uav{.id = 0, .location = {0, 0}, .battery = 0.405}};
  const EnergyModel em;
  advance_world(w, single(0, VehicleKind::Uav, 0), em);
  EXPECT_EQ(w.counters.delivered, 1);
  EXPECT_EQ(w.uavs[0].status, UavStatus::Charging);
  EXPECT_EQ(w.counters.charge_trips, 1);
  advance_world(w, {}, em);  // flies 1 km back to the station
  EXPECT_EQ(w.uavs[0].location, (Point{0, 0}));
  const double arrived = w.uavs[0].battery;
  EXPECT_NEAR(arrived, 0.405 - 0.02, 1e-12);
  int steps = 0;
  while (w.uavs[0].status == UavStatus::Charging && steps < 100) {
    advance_world(w, {}, em);
    ++steps;
  }
  EXPECT_EQ(w.uavs[0].status, UavStatus::Idle);
  EXPECT_DOUBLE_EQ(w.uavs[0].battery, 1.0);
  EXPECT_EQ(steps, static_cast<int>(std::ceil((1.0 - arrived) * 30.0 - 1e-9)));
}

TEST(Engine, LateDeliveryIsCountedAsFailed) {
  auto w = airground::testing::empty_world(line_network(6), {{0, {0, 0}}});
  w.orders = {{0, 0, 5, 0, 2}};
  w.carriers = {Carrier{.id = 0, .location_node = 0, .speed_kmh = 60.0}};
  const EnergyModel em;
  advance_world(w, single(0, VehicleKind::Carrier, 0), em);
  for (int i = 0; i < 4; ++i) advance_world(w, {}, em);
  EXPECT_EQ(w.counters.delivered, 1);
  EXPECT_EQ(w.counters.failed_deliveries, 1);
}

TEST(Engine, RejectsBusyVehicleAndClosedOrder) {
  auto w = airground::testing::empty_world(line_network(6), {{0, {0, 0}}});
  w.orders = {{0, 0, 5, 0, 20}, {1, 0, 4, 0, 20}, {2, 1, 2, 5, 20}};
  w.uavs = {Uav{.id = 0}};
  const EnergyModel em;
  advance_world(w, single(0, VehicleKind::Uav, 0), em);
  EXPECT_THROW(advance_world(w, single(1, VehicleKind::Uav, 0), em), ContractViolation);
  auto w2 = airground::testing::empty_world(line_network(6), {{0, {0, 0}}});
  w2.orders = w.orders;
  w2.uavs = {Uav{.id = 0}};
  EXPECT_THROW(advance_world(w2, single(2, VehicleKind::Uav, 0), em), ContractViolation);
}

TEST(Engine, ConservationAndExclusivityOverEpisodes) {
  GreedyDistancePolicy greedy;
  ExactPolicy exact;
  RandomPolicy random;
  for (DispatchPolicy* inner : std::initializer_list<DispatchPolicy*>{&greedy, &exact, &random}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      AuditingPolicy audit(*inner);
      const auto m = run_episode(tiny_config(), audit, seed, {.measure_time = false});
      EXPECT_EQ(audit.steps, tiny_config().t_max);
      EXPECT_LE(m.dn, m.pn);
      EXPECT_LE(m.pn, m.matched);
      EXPECT_EQ(m.dn, m.dn_uav + m.dn_carrier);
      EXPECT_EQ(m.battery_violations, 0);
      EXPECT_EQ(m.stranded_uavs, 0);
      EXPECT_EQ(m.mean_et, 0.0);
    }
  }
}

TEST(Engine, ExpiredCountMatchesReports) {
  GreedyDistancePolicy greedy;
  auto cfg = tiny_config();
  cfg.orders.generator.arrival_rate = 3.0;
  auto scenario = std::make_shared<const Scenario>(load_scenario(cfg));
  Engine engine(scenario, {.measure_time = false});
  engine.reset(4);
  int expired = 0;
  while (!engine.done()) expired += engine.step(greedy).n_expired;
  EXPECT_EQ(expired, engine.state().counters.expired);
  EXPECT_GT(expired, 0);
}

TEST(Engine, PrepareIsIdempotent) {
  auto scenario = std::make_shared<const Scenario>(load_scenario(tiny_config()));
  Engine engine(scenario);
  EXPECT_THROW(engine.prepare(), ContractViolation);
  engine.reset(1);
  for (int i = 0; i < 5; ++i) {
    GreedyDistancePolicy g;
    engine.step(g);
  }
  const auto a = engine.prepare();
  const auto b = engine.prepare();
  EXPECT_EQ(a.entries, b.entries);
  EXPECT_EQ(a.orders, b.orders);
}

TEST(Engine, TimingIsRecordedWhenEnabled) {
  GreedyDistancePolicy g;
  const auto m = run_episode(tiny_config(), g, 3);
  EXPECT_GT(m.mean_et, 0.0);
}

TEST(Engine, SameSeedSameTrace) {
  GreedyDistancePolicy g;
  RandomPolicy r1, r2;
  EXPECT_EQ(trace_of(tiny_config(), g, 7), trace_of(tiny_config(), g, 7));
  EXPECT_EQ(trace_of(tiny_config(), r1, 7), trace_of(tiny_config(), r2, 7));
  EXPECT_NE(trace_of(tiny_config(), g, 7), trace_of(tiny_config(), g, 8));
}

TEST(Engine, ModeOverrideRestrictsFleet) {
  GreedyDistancePolicy g;
  auto cfg = tiny_config();
  apply_mode(cfg, FleetMode::UavOnly);
  auto m = run_episode(cfg, g, 2, {.measure_time = false});
  EXPECT_EQ(m.dn_carrier, 0);
  EXPECT_GT(m.dn_uav, 0);
  cfg = tiny_config();
  apply_mode(cfg, FleetMode::CarrierOnly);
  m = run_episode(cfg, g, 2, {.measure_time = false});
  EXPECT_EQ(m.dn_uav, 0);
  EXPECT_GT(m.dn_carrier, 0);
}

// Regression guard for the trace format and the simulation itself. Set
// AIRGROUND_UPDATE_GOLDEN=1 to rewrite the files after an intended change.
TEST(Engine, GoldenTraces) {
  GreedyDistancePolicy greedy;
  ExactPolicy exact;
  const std::pair<const char*, DispatchPolicy*> cases[] = {{"greedy_seed3.jsonl", &greedy},
                                                           {"exact_seed3.jsonl", &exact}};
  const bool update = std::getenv("AIRGROUND_UPDATE_GOLDEN") != nullptr;
  for (const auto& [file, policy] : cases) {
    const auto path = std::filesystem::path(AIRGROUND_GOLDEN_DIR) / file;
    const auto got = trace_of(tiny_config(), *policy, 3);
    if (update) {
      std::ofstream(path, std::ios::binary) << got;
      continue;
    }
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    EXPECT_EQ(got, airground::testing::read_file(path)) << file;
  }
}
