#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace airground::testing {

std::vector<Pair> enumerate_best_matching(const FeasibilityMask& mask) {
  std::vector<Pair> best, cur;
  std::vector<bool> used(mask.cols(), false);
  auto go = [&](auto&& self, std::size_t r) -> void {
    if (r == mask.rows()) {
      auto sorted = cur;
      std::sort(sorted.begin(), sorted.end());
      if (sorted.size() > best.size() || (sorted.size() == best.size() && sorted < best)) best = sorted;
      return;
    }
    self(self, r + 1);
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (used[c] || !mask.at(r, c)) continue;
      used[c] = true;
      cur.push_back({mask.orders[r], mask.column(c)});
      self(self, r + 1);
      cur.pop_back();
      used[c] = false;
    }
  };
  go(go, 0);
  return best;
}

std::vector<Pair> naive_greedy(const ScoreMatrix& s, const FeasibilityMask& mask) {
  std::vector<bool> ru(mask.rows(), false), cu(mask.cols(), false);
  std::vector<Pair> out;
  while (true) {
    bool found = false;
    std::size_t br = 0, bc = 0;
    for (std::size_t r = 0; r < mask.rows(); ++r) {
      for (std::size_t c = 0; c < mask.cols(); ++c) {
        if (ru[r] || cu[c] || !mask.at(r, c)) continue;
        const Pair p{mask.orders[r], mask.column(c)};
        const Pair q{mask.orders[br], mask.column(bc)};
        if (!found || s.at(r, c) > s.at(br, bc) || (s.at(r, c) == s.at(br, bc) && p < q)) {
          found = true;
          br = r;
          bc = c;
        }
      }
    }
    if (!found) return out;
    ru[br] = true;
    cu[bc] = true;
    out.push_back({mask.orders[br], mask.column(bc)});
  }
}

ScoreMatrix random_scores(Rng& rng, const FeasibilityMask& mask, int levels) {
  auto s = ScoreMatrix::masked_like(mask);
  for (std::size_t r = 0; r < mask.rows(); ++r)
    for (std::size_t c = 0; c < mask.cols(); ++c)
      if (mask.at(r, c)) s.at(r, c) = static_cast<double>(rng.uniform_int(0, levels));
  return s;
}

bool is_maximal(const Assignment& a, const FeasibilityMask& mask) {
  std::vector<bool> ru(mask.rows(), false), cu(mask.cols(), false);
  for (const auto& p : a.pairs) {
    for (std::size_t r = 0; r < mask.rows(); ++r)
      if (mask.orders[r] == p.order_id) ru[r] = true;
    for (std::size_t c = 0; c < mask.cols(); ++c)
      if (mask.column(c) == p.vehicle) cu[c] = true;
  }
  for (std::size_t r = 0; r < mask.rows(); ++r)
    for (std::size_t c = 0; c < mask.cols(); ++c)
      if (mask.at(r, c) && !ru[r] && !cu[c]) return false;
  return true;
}

nn::Tensor2 random_tensor(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  nn::Tensor2 t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1, 1);
  return t;
}

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

void record(GradCheck& g, const std::string& name, Eigen::Index i, double fd, double an, double tol) {
  ++g.checked;
  const double e = rel_err(fd, an);
  g.worst = std::max(g.worst, e);
  if (e > tol) {
    if (g.bad == 0) {
      std::ostringstream os;
      os << name << "[" << i << "] analytic " << an << " numeric " << fd;
      g.first_bad = os.str();
    }
    ++g.bad;
  }
}

double actor_loss(const nn::Actor& a, const GlobalState& gs, const nn::Tensor2& goals_in,
                  const nn::Tensor2& wg, const nn::Tensor2& wr, double decay) {
  const auto out = a.forward(gs, &goals_in);
  double loss = (out.goals.array() * wg.array()).sum() + (out.raw_scores.array() * wr.array()).sum();
  if (decay > 0.0) {
    // log cosh(atanh(s)) = -log(1 - s^2) / 2; empty entries are 0 either way.
    const auto s2 = out.raw_scores.array().square();
    loss += decay * (-0.5 * (1.0 - s2).log().sum() + 0.5 * out.logits.array().square().sum());
  }
  return loss;
}

}  // namespace

GradCheck check_actor_gradients(nn::Actor& actor, const GlobalState& gs, Rng& rng, int per_param,
                                double tol, double preact_decay) {
  const auto& caps = gs.caps;
  const nn::Tensor2 goals_in = actor.forward(gs).goals_in;
  const nn::Tensor2 wg = random_tensor(rng, caps.n_max, 2);
  const nn::Tensor2 wr = random_tensor(rng, caps.n_max, caps.vehicles());
  nn::Actor::Cache cache;
  actor.forward(gs, &goals_in, &cache);
  nn::ParamRefs params;
  actor.collect(params);
  nn::zero_grads(params);
  actor.backward(gs, cache, wg, wr, preact_decay);

  GradCheck g;
  const double h = 1e-6;
  for (nn::Param* p : params) {
    const auto n = p->value.size();
    for (int k = 0; k < std::min<int>(per_param, static_cast<int>(n)); ++k) {
      const auto i = static_cast<Eigen::Index>(rng.uniform_int(0, n - 1));
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + h;
      const double up = actor_loss(actor, gs, goals_in, wg, wr, preact_decay);
      v = saved - h;
      const double dn = actor_loss(actor, gs, goals_in, wg, wr, preact_decay);
      v = saved;
      record(g, p->name, i, (up - dn) / (2 * h), p->grad.data()[i], tol);
    }
  }
  return g;
}

GradCheck check_critic_gradients(nn::Critic& critic, const nn::Tensor2& x, Rng& rng, double tol) {
  Eigen::VectorXd wq(x.rows());
  for (Eigen::Index i = 0; i < wq.size(); ++i) wq(i) = rng.uniform(-1, 1);
  auto loss = [&](const nn::Tensor2& in) { return critic.forward(in).dot(wq); };
  nn::Critic::Cache cache;
  critic.forward(x, &cache);
  nn::ParamRefs params;
  critic.collect(params);
  nn::zero_grads(params);
  const nn::Tensor2 dx = critic.backward(cache, wq);

  GradCheck g;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    nn::Tensor2 xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    record(g, "input", i, (loss(xp) - loss(xm)) / (2 * h), dx.data()[i], tol);
  }
  for (nn::Param* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double s = p->value.data()[i];
      p->value.data()[i] = s + h;
      const double up = loss(x);
      p->value.data()[i] = s - h;
      const double dn = loss(x);
      p->value.data()[i] = s;
      record(g, p->name, i, (up - dn) / (2 * h), p->grad.data()[i], tol);
    }
  }
  return g;
}

std::vector<int> shuffled(Rng& rng, int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.uniform_int(0, i)]);
  return p;
}

GlobalState permute_uavs(const GlobalState& gs, const std::vector<int>& perm) {
  GlobalState out = gs;
  const int m = gs.caps.vehicles();
  for (int i = 0; i < gs.caps.n_uav; ++i) {
    const int j = perm[i];
    for (int f = 0; f < kUavFeatures; ++f) out.uav_seg[i * kUavFeatures + f] = gs.uav_seg[j * kUavFeatures + f];
    out.uav_ids[i] = gs.uav_ids[j];
    for (int s = 0; s < gs.caps.n_max; ++s) {
      out.pair_valid[s * m + i] = gs.pair_valid[s * m + j];
      for (int f = 0; f < kPairFeatures; ++f) {
        out.pair_feat[(s * m + i) * kPairFeatures + f] = gs.pair_feat[(s * m + j) * kPairFeatures + f];
      }
    }
  }
  return out;
}

GlobalState permute_carriers(const GlobalState& gs, const std::vector<int>& perm) {
  GlobalState out = gs;
  const int m = gs.caps.vehicles();
  const int off = gs.caps.n_uav;
  for (int i = 0; i < gs.caps.n_carrier; ++i) {
    const int j = perm[i];
    for (int f = 0; f < kCarrierFeatures; ++f) {
      out.carrier_seg[i * kCarrierFeatures + f] = gs.carrier_seg[j * kCarrierFeatures + f];
    }
    out.carrier_ids[i] = gs.carrier_ids[j];
    for (int s = 0; s < gs.caps.n_max; ++s) {
      out.pair_valid[s * m + off + i] = gs.pair_valid[s * m + off + j];
      for (int f = 0; f < kPairFeatures; ++f) {
        out.pair_feat[(s * m + off + i) * kPairFeatures + f] = gs.pair_feat[(s * m + off + j) * kPairFeatures + f];
      }
    }
  }
  return out;
}

GlobalState permute_orders(const GlobalState& gs, const std::vector<int>& perm) {
  GlobalState out = gs;
  const int m = gs.caps.vehicles();
  for (int i = 0; i < gs.caps.n_max; ++i) {
    const int j = perm[i];
    for (int f = 0; f < kOrderFeatures; ++f) {
      out.order_seg[i * kOrderFeatures + f] = gs.order_seg[j * kOrderFeatures + f];
    }
    out.valid_order[i] = gs.valid_order[j];
    out.order_ids[i] = gs.order_ids[j];
    for (int v = 0; v < m; ++v) {
      out.pair_valid[i * m + v] = gs.pair_valid[j * m + v];
      for (int f = 0; f < kPairFeatures; ++f) {
        out.pair_feat[(i * m + v) * kPairFeatures + f] = gs.pair_feat[(j * m + v) * kPairFeatures + f];
      }
    }
  }
  return out;
}

}  // namespace airground::testing
