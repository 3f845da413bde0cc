#include "airground/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <queue>
#include <shared_mutex>

#include "airground/csv.hpp"
#include "airground/errors.hpp"

namespace airground {

double euclidean_distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

void BoundingBox::extend(Point p) {
  min_x = std::min(min_x, p.x);
  min_y = std::min(min_y, p.y);
  max_x = std::max(max_x, p.x);
  max_y = std::max(max_y, p.y);
}

double BoundingBox::diagonal() const { return std::hypot(width(), height()); }

struct RoadNetwork::Memo {
  std::shared_mutex mutex;
  std::unordered_map<std::size_t, std::shared_ptr<const Tree>> trees;
};

RoadNetwork::RoadNetwork(std::vector<std::pair<NodeId, Point>> nodes, std::vector<Edge> edges)
    : edges_(std::move(edges)), memo_(std::make_shared<Memo>()) {
  if (nodes.empty()) throw InputError("road network needs at least one node");
  ids_.reserve(nodes.size());
  points_.reserve(nodes.size());
  for (const auto& [id, p] : nodes) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InputError("node " + std::to_string(id) + " has non-finite coordinates");
    }
    if (!index_.emplace(id, ids_.size()).second) {
      throw InputError("duplicate node id " + std::to_string(id));
    }
    ids_.push_back(id);
    points_.push_back(p);
  }
  bounds_ = {points_[0].x, points_[0].y, points_[0].x, points_[0].y};
  for (const auto& p : points_) bounds_.extend(p);

  adjacency_.resize(ids_.size());
  for (const auto& e : edges_) {
    if (!(e.length_km > 0.0) || !std::isfinite(e.length_km)) {
      throw InputError("edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                       " must have positive length");
    }
    const auto s = index_of(e.src);
    const auto d = index_of(e.dst);
    adjacency_[s].push_back({d, e.length_km});
    if (e.bidirectional) adjacency_[d].push_back({s, e.length_km});
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const Adjacent& a, const Adjacent& b) {
      return a.to != b.to ? a.to < b.to : a.length < b.length;
    });
  }
}

Point RoadNetwork::point(NodeId id) const { return points_[index_of(id)]; }

std::size_t RoadNetwork::index_of(NodeId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw InputError("unknown node id " + std::to_string(id));
  return it->second;
}

std::shared_ptr<const RoadNetwork::Tree> RoadNetwork::tree(std::size_t src) const {
  {
    std::shared_lock lock(memo_->mutex);
    const auto it = memo_->trees.find(src);
    if (it != memo_->trees.end()) return it->second;
  }
  const std::size_t n = ids_.size();
  auto t = std::make_shared<Tree>();
  t->dist.assign(n, std::numeric_limits<double>::infinity());
  t->pred.assign(n, -1);
  std::vector<char> settled(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  t->dist[src] = 0.0;
  heap.emplace(0.0, src);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    for (const auto& [v, len] : adjacency_[u]) {
      const double nd = d + len;
      // Lower predecessor index wins exact ties so paths are reproducible.
      if (nd < t->dist[v] ||
          (nd == t->dist[v] && !settled[v] && static_cast<std::int64_t>(u) < t->pred[v])) {
        t->dist[v] = nd;
        t->pred[v] = static_cast<std::int64_t>(u);
        heap.emplace(nd, v);
      }
    }
  }
  std::unique_lock lock(memo_->mutex);
  auto [it, inserted] = memo_->trees.emplace(src, std::move(t));
  return it->second;
}

std::optional<double> RoadNetwork::distance(NodeId src, NodeId dst) const {
  const auto s = index_of(src);
  const auto d = index_of(dst);
  if (s == d) return 0.0;
  const double v = tree(s)->dist[d];
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<NodeId> RoadNetwork::path(NodeId src, NodeId dst) const {
  const auto s = index_of(src);
  const auto d = index_of(dst);
  if (s == d) return {src};
  const auto t = tree(s);
  if (!std::isfinite(t->dist[d])) return {};
  std::vector<NodeId> out;
  for (std::int64_t at = static_cast<std::int64_t>(d); at != -1; at = t->pred[at]) {
    out.push_back(ids_[static_cast<std::size_t>(at)]);
    if (static_cast<std::size_t>(at) == s) break;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<double> shortest_path_distance(const RoadNetwork& net, NodeId src, NodeId dst) {
  return net.distance(src, dst);
}

NodeId nearest_node(const RoadNetwork& net, Point p) {
  NodeId best = net.node_ids().front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const NodeId id : net.node_ids()) {
    const double d = euclidean_distance(net.point(id), p);
    if (d < best_d || (d == best_d && id < best)) {
      best = id;
      best_d = d;
    }
  }
  return best;
}

Point project_equirectangular(double lon, double lat, double ref_lon, double ref_lat) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double kDeg = std::numbers::pi / 180.0;
  return {kEarthRadiusKm * (lon - ref_lon) * kDeg * std::cos(ref_lat * kDeg),
          kEarthRadiusKm * (lat - ref_lat) * kDeg};
}

RoadNetwork load_road_network(const std::string& nodes_csv, const std::string& edges_csv) {
  const auto nodes_table = csv::read(nodes_csv);
  std::vector<std::pair<NodeId, Point>> nodes;
  const std::vector<std::string> planar{"node_id", "x_km", "y_km"};
  const std::vector<std::string> geographic{"node_id", "lon", "lat"};
  if (nodes_table.header == planar) {
    for (const auto& row : nodes_table.rows) {
      nodes.emplace_back(csv::to_int(row[0], nodes_csv),
                         Point{csv::to_double(row[1], nodes_csv), csv::to_double(row[2], nodes_csv)});
    }
  } else if (nodes_table.header == geographic) {
    double lon_sum = 0.0;
    double lat_sum = 0.0;
    for (const auto& row : nodes_table.rows) {
      lon_sum += csv::to_double(row[1], nodes_csv);
      lat_sum += csv::to_double(row[2], nodes_csv);
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, nodes_table.rows.size()));
    const double ref_lon = lon_sum / n;
    const double ref_lat = lat_sum / n;
    for (const auto& row : nodes_table.rows) {
      nodes.emplace_back(csv::to_int(row[0], nodes_csv),
                         project_equirectangular(csv::to_double(row[1], nodes_csv),
                                                 csv::to_double(row[2], nodes_csv), ref_lon,
                                                 ref_lat));
    }
  } else {
    throw InputError(nodes_csv + ": header must be 'node_id,x_km,y_km' or 'node_id,lon,lat'");
  }

  const auto edges_table = csv::read(edges_csv);
  csv::expect_header(edges_table, {"src", "dst", "length_km", "bidirectional"}, edges_csv);
  std::vector<RoadNetwork::Edge> edges;
  for (const auto& row : edges_table.rows) {
    const auto flag = csv::to_int(row[3], edges_csv);
    if (flag != 0 && flag != 1) throw InputError(edges_csv + ": bidirectional must be 0 or 1");
    edges.push_back({csv::to_int(row[0], edges_csv), csv::to_int(row[1], edges_csv),
                     csv::to_double(row[2], edges_csv), flag == 1});
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

void write_road_network(const RoadNetwork& net, const std::string& nodes_csv,
                        const std::string& edges_csv) {
  std::ofstream nodes(nodes_csv);
  if (!nodes) throw FileError("cannot write " + nodes_csv);
  nodes << std::setprecision(17) << "node_id,x_km,y_km\n";
  for (const NodeId id : net.node_ids()) {
    const Point p = net.point(id);
    nodes << id << ',' << p.x << ',' << p.y << '\n';
  }
  std::ofstream edges(edges_csv);
  if (!edges) throw FileError("cannot write " + edges_csv);
  edges << std::setprecision(17) << "src,dst,length_km,bidirectional\n";
  for (const auto& e : net.edges()) {
    edges << e.src << ',' << e.dst << ',' << e.length_km << ',' << (e.bidirectional ? 1 : 0)
          << '\n';
  }
}

}  // namespace airground
