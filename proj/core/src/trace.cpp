#include "airground/trace.hpp"

#include <algorithm>
#include <optional>

#include <nlohmann/json.hpp>

#include "airground/engine.hpp"

namespace airground {

using Json = nlohmann::ordered_json;

namespace {

void emit(std::ostream& out, const Json& j) { out << j.dump() << '\n'; }

std::optional<std::size_t> index_in(const std::vector<std::int64_t>& ids, std::int64_t id) {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

void TraceWriter::step(const StepReport& r) {
  Json j;
  j["kind"] = "step";
  j["clock"] = r.clock;
  j["matched"] = r.n_matched;
  j["picked"] = r.n_picked;
  j["delivered"] = r.n_delivered;
  j["expired"] = r.n_expired;
  j["failed"] = r.n_failed_deliveries;
  j["delivered_uav"] = r.n_delivered_uav;
  j["delivered_carrier"] = r.n_delivered_carrier;
  j["et_s"] = r.dispatch_wall_time;
  emit(*out_, j);
}

void TraceWriter::dispatch(int clock, const Assignment& assignment, const ScoreMatrix* scores,
                           const GoalMap* goals) {
  Json pairs = Json::array();
  for (const auto& p : assignment.pairs) {
    Json e;
    e["order"] = p.order_id;
    e["vehicle_kind"] = to_string(p.vehicle.kind);
    e["vehicle"] = p.vehicle.id;
    e["score"] = nullptr;
    if (scores) {
      const auto r = index_in(scores->orders, p.order_id);
      const auto& cols = p.vehicle.kind == VehicleKind::Uav ? scores->uav_cols : scores->carrier_cols;
      auto c = index_in(cols, p.vehicle.id);
      if (r && c) {
        if (p.vehicle.kind == VehicleKind::Carrier) *c += scores->uav_cols.size();
        e["score"] = scores->at(*r, *c);
      }
    }
    e["goal"] = nullptr;
    if (goals) {
      const auto it = goals->find(p.order_id);
      if (it != goals->end()) e["goal"] = {it->second[0], it->second[1]};
    }
    pairs.push_back(std::move(e));
  }
  Json j;
  j["kind"] = "dispatch";
  j["clock"] = clock;
  j["pairs"] = std::move(pairs);
  emit(*out_, j);
}

void TraceWriter::vehicles(const WorldState& state) {
  for (const auto& u : state.uavs) {
    Json j;
    j["kind"] = "vehicle";
    j["clock"] = state.clock;
    j["vehicle_kind"] = "uav";
    j["id"] = u.id;
    j["x"] = u.location.x;
    j["y"] = u.location.y;
    j["node"] = nullptr;
    j["battery"] = u.battery;
    j["status"] = to_string(u.status);
    emit(*out_, j);
  }
  for (const auto& c : state.carriers) {
    const Point p = state.net.point(c.location_node);
    Json j;
    j["kind"] = "vehicle";
    j["clock"] = state.clock;
    j["vehicle_kind"] = "carrier";
    j["id"] = c.id;
    j["x"] = p.x;
    j["y"] = p.y;
    j["node"] = c.location_node;
    j["battery"] = nullptr;
    j["status"] = to_string(c.status);
    emit(*out_, j);
  }
}

void TraceWriter::order_event(int clock, OrderId id, OrderStatus to) {
  Json j;
  j["kind"] = "order_event";
  j["clock"] = clock;
  j["id"] = id;
  j["to"] = to_string(to);
  emit(*out_, j);
}

}  // namespace airground
