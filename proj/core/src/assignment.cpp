#include "airground/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <string>

#include "airground/errors.hpp"

namespace airground {

ScoreMatrix ScoreMatrix::masked_like(const FeasibilityMask& mask) {
  ScoreMatrix s;
  s.orders = mask.orders;
  s.uav_cols = mask.uav_cols;
  s.carrier_cols = mask.carrier_cols;
  s.entries.assign(mask.rows() * mask.cols(), kMaskedScore);
  return s;
}

namespace {

std::size_t row_of(const FeasibilityMask& mask, OrderId id) {
  const auto it = std::find(mask.orders.begin(), mask.orders.end(), id);
  if (it == mask.orders.end()) {
    throw ContractViolation("order " + std::to_string(id) + " is not a mask row");
  }
  return static_cast<std::size_t>(it - mask.orders.begin());
}

std::size_t col_of(const FeasibilityMask& mask, VehicleRef v) {
  const auto& ids = v.kind == VehicleKind::Uav ? mask.uav_cols : mask.carrier_cols;
  const auto it = std::find(ids.begin(), ids.end(), v.id);
  if (it == ids.end()) {
    throw ContractViolation(std::string(to_string(v.kind)) + " " + std::to_string(v.id) +
                            " is not a mask column");
  }
  const auto offset = static_cast<std::size_t>(it - ids.begin());
  return v.kind == VehicleKind::Uav ? offset : mask.uav_cols.size() + offset;
}

Pair make_pair(const FeasibilityMask& mask, std::size_t r, std::size_t c) {
  return {mask.orders[r], mask.column(c)};
}

/// Hopcroft-Karp restricted to enabled rows and columns.
class BipartiteMatcher {
 public:
  explicit BipartiteMatcher(const FeasibilityMask& mask)
      : mask_(mask), rows_(mask.rows()), cols_(mask.cols()) {
    adj_.resize(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        if (mask.at(r, c)) adj_[r].push_back(c);
      }
    }
  }

  std::size_t solve(const std::vector<char>& row_on, const std::vector<char>& col_on) {
    match_row_.assign(rows_, kNone);
    match_col_.assign(cols_, kNone);
    std::size_t size = 0;
    while (bfs(row_on, col_on)) {
      for (std::size_t r = 0; r < rows_; ++r) {
        if (row_on[r] && match_row_[r] == kNone && dfs(r, col_on)) ++size;
      }
    }
    return size;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  static constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

  bool bfs(const std::vector<char>& row_on, const std::vector<char>& col_on) {
    dist_.assign(rows_, kInf);
    std::queue<std::size_t> q;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (row_on[r] && match_row_[r] == kNone) {
        dist_[r] = 0;
        q.push(r);
      }
    }
    bool found = false;
    while (!q.empty()) {
      const auto r = q.front();
      q.pop();
      for (const auto c : adj_[r]) {
        if (!col_on[c]) continue;
        const auto next = match_col_[c];
        if (next == kNone) {
          found = true;
        } else if (dist_[next] == kInf) {
          dist_[next] = dist_[r] + 1;
          q.push(next);
        }
      }
    }
    return found;
  }

  bool dfs(std::size_t r, const std::vector<char>& col_on) {
    for (const auto c : adj_[r]) {
      if (!col_on[c]) continue;
      const auto next = match_col_[c];
      if (next == kNone || (dist_[next] == dist_[r] + 1 && dfs(next, col_on))) {
        match_row_[r] = c;
        match_col_[c] = r;
        return true;
      }
    }
    dist_[r] = kInf;
    return false;
  }

  const FeasibilityMask& mask_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> match_row_;
  std::vector<std::size_t> match_col_;
  std::vector<std::size_t> dist_;
};

void check_size(const FeasibilityMask& mask, std::size_t max_rows, std::size_t max_cols) {
  if (mask.rows() > max_rows || mask.cols() > max_cols) {
    throw SizeError("exact matching limited to " + std::to_string(max_rows) + " x " +
                    std::to_string(max_cols) + ", got " + std::to_string(mask.rows()) + " x " +
                    std::to_string(mask.cols()));
  }
}

}  // namespace

void validate_assignment(const Assignment& a, const FeasibilityMask& mask) {
  std::set<OrderId> orders;
  std::set<VehicleRef> vehicles;
  for (const auto& p : a.pairs) {
    if (!orders.insert(p.order_id).second) {
      throw ContractViolation("order " + std::to_string(p.order_id) + " assigned twice");
    }
    if (!vehicles.insert(p.vehicle).second) {
      throw ContractViolation(std::string(to_string(p.vehicle.kind)) + " " +
                              std::to_string(p.vehicle.id) + " assigned twice");
    }
    if (!mask.at(row_of(mask, p.order_id), col_of(mask, p.vehicle))) {
      throw ContractViolation("pair (" + std::to_string(p.order_id) + ", " +
                              std::to_string(p.vehicle.id) + ") is infeasible");
    }
  }
}

Assignment greedy_match(const ScoreMatrix& scores, const FeasibilityMask& mask) {
  if (scores.rows() != mask.rows() || scores.cols() != mask.cols()) {
    throw ContractViolation("score matrix shape does not match the mask");
  }
  struct Candidate {
    double score;
    std::size_t r;
    std::size_t c;
  };
  std::vector<Candidate> cands;
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (!mask.at(r, c)) continue;
      const double s = scores.at(r, c);
      if (std::isnan(s)) throw ContractViolation("NaN score for a feasible pair");
      cands.push_back({s, r, c});
    }
  }
  // Columns are laid out UAVs first, each block by ascending id, and rows by
  // ascending order id, so index order is the documented tie-break whenever
  // the ids themselves are sorted. Compare the ids directly anyway.
  std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    const Pair pa = make_pair(mask, a.r, a.c);
    const Pair pb = make_pair(mask, b.r, b.c);
    return pa < pb;
  });
  std::vector<char> row_used(mask.rows(), 0);
  std::vector<char> col_used(mask.cols(), 0);
  Assignment out;
  for (const auto& cand : cands) {
    if (row_used[cand.r] || col_used[cand.c]) continue;
    row_used[cand.r] = 1;
    col_used[cand.c] = 1;
    out.pairs.push_back(make_pair(mask, cand.r, cand.c));
  }
  return out;
}

std::size_t max_matching_size(const FeasibilityMask& mask) {
  BipartiteMatcher m(mask);
  return m.solve(std::vector<char>(mask.rows(), 1), std::vector<char>(mask.cols(), 1));
}

namespace {

/// Row and column visit order matching the pair ordering (order id, kind, id).
std::vector<std::size_t> sorted_rows(const FeasibilityMask& mask) {
  std::vector<std::size_t> idx(mask.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return mask.orders[a] < mask.orders[b]; });
  return idx;
}

std::vector<std::size_t> sorted_cols(const FeasibilityMask& mask) {
  std::vector<std::size_t> idx(mask.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return mask.column(a) < mask.column(b); });
  return idx;
}

void sort_pairs(Assignment& a) { std::sort(a.pairs.begin(), a.pairs.end()); }

}  // namespace

Assignment exact_match(const FeasibilityMask& mask, const ExactOptions& options) {
  check_size(mask, options.max_rows, options.max_cols);
  if (options.method == ExactMethod::BranchAndBound) return exact_match_branch_and_bound(mask);

  BipartiteMatcher matcher(mask);
  std::vector<char> row_on(mask.rows(), 1);
  std::vector<char> col_on(mask.cols(), 1);
  const std::size_t optimum = matcher.solve(row_on, col_on);

  // Fix pairs in lexicographic order, keeping a choice only if the remaining
  // rows and columns can still complete an optimal matching.
  Assignment out;
  const auto rows = sorted_rows(mask);
  const auto cols = sorted_cols(mask);
  for (const auto r : rows) {
    if (out.size() == optimum) break;
    row_on[r] = 0;
    for (const auto c : cols) {
      if (!col_on[c] || !mask.at(r, c)) continue;
      col_on[c] = 0;
      if (out.size() + 1 + matcher.solve(row_on, col_on) == optimum) {
        out.pairs.push_back(make_pair(mask, r, c));
        break;
      }
      col_on[c] = 1;
    }
  }
  sort_pairs(out);
  return out;
}

Assignment exact_match_branch_and_bound(const FeasibilityMask& mask) {
  check_size(mask, kBranchAndBoundCap, kBranchAndBoundCap);
  const auto rows = sorted_rows(mask);
  const auto cols = sorted_cols(mask);
  const std::size_t n = rows.size();

  std::vector<std::size_t> current;  // chosen column per visited row, or npos
  std::vector<std::size_t> best;
  std::size_t best_size = 0;
  bool have_best = false;
  std::vector<char> col_used(mask.cols(), 0);
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  // Visiting "match with the smallest column" before "skip the row" walks the
  // pair lists in lexicographic order, so the first optimum found is kept.
  auto search = [&](auto&& self, std::size_t depth, std::size_t size) -> void {
    if (have_best && size + (n - depth) <= best_size) return;
    if (depth == n) {
      best = current;
      best_size = size;
      have_best = true;
      return;
    }
    const auto r = rows[depth];
    for (const auto c : cols) {
      if (col_used[c] || !mask.at(r, c)) continue;
      col_used[c] = 1;
      current.push_back(c);
      self(self, depth + 1, size + 1);
      current.pop_back();
      col_used[c] = 0;
    }
    current.push_back(npos);
    self(self, depth + 1, size);
    current.pop_back();
  };
  search(search, 0, 0);

  Assignment out;
  for (std::size_t d = 0; d < best.size(); ++d) {
    if (best[d] != npos) out.pairs.push_back(make_pair(mask, rows[d], best[d]));
  }
  sort_pairs(out);
  return out;
}

ScoreMatrix greedy_distance_policy(const WorldState& state, const FeasibilityMask& mask) {
  auto scores = ScoreMatrix::masked_like(mask);
  const std::size_t n_uav = mask.uav_cols.size();
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    const Order& o = state.order(mask.orders[r]);
    const Point origin = state.net.point(o.origin);
    const Point dest = state.net.point(o.destination);
    std::optional<double> road_od;
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (!mask.at(r, c)) continue;
      if (c < n_uav) {
        const Point at = state.uav(mask.uav_cols[c]).location;
        scores.at(r, c) = -(euclidean_distance(at, origin) + euclidean_distance(origin, dest));
      } else {
        if (!road_od) road_od = state.net.distance(o.origin, o.destination);
        const auto& v = state.carrier(mask.carrier_cols[c - n_uav]);
        const auto approach = state.net.distance(v.location_node, o.origin);
        if (!approach || !road_od) continue;
        scores.at(r, c) = -(*approach + *road_od);
      }
    }
  }
  return scores;
}

}  // namespace airground
