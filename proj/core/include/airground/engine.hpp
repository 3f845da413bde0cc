#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "airground/assignment.hpp"
#include "airground/feasibility.hpp"
#include "airground/scenario.hpp"
#include "airground/trace.hpp"
#include "airground/world.hpp"

namespace airground {

struct StepReport {
  int clock = 0;
  int n_matched = 0;
  int n_picked = 0;
  int n_delivered = 0;
  int n_expired = 0;
  int n_failed_deliveries = 0;
  int n_delivered_uav = 0;
  int n_delivered_carrier = 0;
  double dispatch_wall_time = 0.0;  // seconds, Phase 2 only
};

struct EpisodeMetrics {
  int pn = 0;
  int dn = 0;
  int matched = 0;
  double mean_et = 0.0;
  int dn_uav = 0;
  int dn_carrier = 0;
  int battery_violations = 0;  // battery would have gone below zero
  int stranded_uavs = 0;       // idle UAV unable to reach any station
  std::vector<StepReport> step_reports;
};

/// What a policy decided for one epoch.
struct Decision {
  Assignment assignment;
  std::optional<ScoreMatrix> scores;
  GoalMap goals;
};

class DispatchPolicy {
 public:
  virtual ~DispatchPolicy() = default;
  virtual std::string name() const = 0;
  /// Called once per episode before the first step.
  virtual void begin_episode(std::uint64_t seed) { (void)seed; }
  virtual Decision decide(const WorldState& state, const FeasibilityMask& mask) = 0;
};

/// Moves one timestep: commits new assignments as missions, advances every
/// vehicle along its route, registers pickups and deliveries, routes UAVs
/// below the charge threshold to the station nearest their position, recharges
/// stationed UAVs, then increments the clock. Throws ContractViolation if an
/// assignment names a busy vehicle or a non-pending order.
StepReport advance_world(WorldState& state, const Assignment& new_assignments,
                         const EnergyModel& em, TraceWriter* trace = nullptr);

struct EngineOptions {
  bool measure_time = true;  // false: ET recorded as 0 for byte-stable outputs
  TraceWriter* trace = nullptr;
};

/// Single-episode simulator exposing the per-epoch loop so the trainer can
/// observe states between steps.
class Engine {
 public:
  Engine(std::shared_ptr<const Scenario> scenario, EngineOptions options = {});

  void reset(std::uint64_t seed);
  bool done() const { return state_->clock >= state_->t_max; }

  /// Phase 1 and the mask of Phase 2 for the current clock. Expires overdue
  /// orders first.
  const FeasibilityMask& prepare();

  /// Runs the policy on the prepared mask (timed together with prepare) and
  /// executes Phase 3.
  StepReport step(DispatchPolicy& policy);

  const WorldState& state() const { return *state_; }
  const Decision& last_decision() const { return last_decision_; }
  const FeasibilityMask& mask() const { return mask_; }
  EpisodeMetrics metrics() const;
  const Scenario& scenario() const { return *scenario_; }

 private:
  std::shared_ptr<const Scenario> scenario_;
  EngineOptions options_;
  std::optional<WorldState> state_;
  FeasibilityMask mask_;
  Decision last_decision_;
  bool prepared_ = false;
  int pending_expired_ = 0;
  double prepare_seconds_ = 0.0;
  std::vector<StepReport> reports_;
  int battery_violations_ = 0;
  int stranded_ = 0;
};

/// T_max epochs of: active check, mask + scoring + matching (timed as ET),
/// execution. Equal (scenario, policy state, seed) give identical traces.
EpisodeMetrics run_episode(std::shared_ptr<const Scenario> scenario, DispatchPolicy& policy,
                           std::uint64_t seed, EngineOptions options = {});

EpisodeMetrics run_episode(const ScenarioConfig& config, DispatchPolicy& policy,
                           std::uint64_t seed, EngineOptions options = {});

/// Counts idle UAVs whose stored energy cannot reach the nearest station.
int count_stranded_uavs(const WorldState& state, const EnergyModel& em);

}  // namespace airground
