#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace airground {

using NodeId = std::int64_t;

/// Projected planar coordinates in kilometers.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double euclidean_distance(Point a, Point b);

/// Axis-aligned bounds used to normalize positions.
struct BoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  void extend(Point p);
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double diagonal() const;
};

/// Immutable road graph. Node ids are arbitrary integers from the input data;
/// edges may be one-way or bidirectional.
///
/// Single-source shortest-path trees are computed on demand with Dijkstra and
/// memoized per source. The memo is guarded by a shared mutex, so concurrent
/// readers are safe and results never depend on query order. Copies share the
/// memo, which is sound because edges never change after construction.
class RoadNetwork {
 public:
  struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    double length_km = 0.0;
    bool bidirectional = true;
  };

  RoadNetwork(std::vector<std::pair<NodeId, Point>> nodes, std::vector<Edge> edges);

  std::size_t node_count() const { return ids_.size(); }
  const std::vector<NodeId>& node_ids() const { return ids_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_node(NodeId id) const { return index_.contains(id); }

  /// Throws InputError for unknown ids.
  Point point(NodeId id) const;
  std::size_t index_of(NodeId id) const;

  const BoundingBox& bounds() const { return bounds_; }

  /// Minimum total length from src to dst, or nullopt when unreachable.
  std::optional<double> distance(NodeId src, NodeId dst) const;

  /// Node sequence of a minimum-length path (src first, dst last), or empty
  /// when unreachable. Equal-length alternatives resolve deterministically.
  std::vector<NodeId> path(NodeId src, NodeId dst) const;

 private:
  struct Tree {
    std::vector<double> dist;
    std::vector<std::int64_t> pred;
  };
  struct Adjacent {
    std::size_t to;
    double length;
  };
  struct Memo;

  std::shared_ptr<const Tree> tree(std::size_t src) const;

  std::vector<NodeId> ids_;
  std::vector<Point> points_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Adjacent>> adjacency_;
  BoundingBox bounds_;
  std::shared_ptr<Memo> memo_;
};

std::optional<double> shortest_path_distance(const RoadNetwork& net, NodeId src, NodeId dst);

/// Node minimizing Euclidean distance to p; ties go to the lowest node id.
NodeId nearest_node(const RoadNetwork& net, Point p);

/// Loads `nodes.csv` (`node_id,x_km,y_km`, or `node_id,lon,lat` which is
/// projected equirectangularly around the node centroid) and `edges.csv`
/// (`src,dst,length_km,bidirectional`).
RoadNetwork load_road_network(const std::string& nodes_csv, const std::string& edges_csv);

void write_road_network(const RoadNetwork& net, const std::string& nodes_csv,
                        const std::string& edges_csv);

/// Equirectangular projection of (lon, lat) degrees around a reference point.
Point project_equirectangular(double lon, double lat, double ref_lon, double ref_lat);

}  // namespace airground
