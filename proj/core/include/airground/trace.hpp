#pragma once

#include <array>
#include <map>
#include <ostream>

#include "airground/assignment.hpp"
#include "airground/world.hpp"

namespace airground {

struct StepReport;

/// Goal distribution per order: {uav, carrier}.
using GoalMap = std::map<OrderId, std::array<double, 2>>;

/// JSONL trace emitter. Field names and order are documented in
/// docs/trace_schema.md and are part of the byte-stability contract.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out) : out_(&out) {}

  void step(const StepReport& report);
  void dispatch(int clock, const Assignment& assignment, const ScoreMatrix* scores,
                const GoalMap* goals);
  void vehicles(const WorldState& state);
  void order_event(int clock, OrderId id, OrderStatus to);

 private:
  std::ostream* out_;
};

}  // namespace airground
