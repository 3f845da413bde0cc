#include "airground/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "airground/errors.hpp"

namespace airground::nn {

namespace {

Tensor2 relu(const Tensor2& x) { return x.cwiseMax(0.0); }

Tensor2 relu_grad(const Tensor2& pre, const Tensor2& dy) {
  return (pre.array() > 0.0).select(dy, 0.0);
}

std::vector<int> flagged(const std::vector<std::uint8_t>& flags) {
  std::vector<int> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

template <typename Ids>
std::vector<std::uint8_t> present(const Ids& ids) {
  std::vector<std::uint8_t> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = ids[i] >= 0 ? 1 : 0;
  return out;
}

void softmax_rows(Tensor2& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    x.row(r) = (x.row(r).array() - mx).exp().matrix();
    x.row(r) /= x.row(r).sum();
  }
}

}  // namespace

void zero_grads(const ParamRefs& params) {
  for (auto* p : params) p->grad.setZero();
}

double grad_norm(const ParamRefs& params) {
  double sq = 0.0;
  for (auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(const ParamRefs& params, double max_norm) {
  const double n = grad_norm(params);
  if (std::isfinite(n) && max_norm > 0.0 && n > max_norm) {
    const double s = max_norm / n;
    for (auto* p : params) p->grad *= s;
  }
  return n;
}

// ---- Linear ---------------------------------------------------------------

Linear::Linear(const std::string& name, int in, int out)
    : w(name + ".w", out, in), b(name + ".b", 1, out) {}

void Linear::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, in())));
  for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = rng.uniform(-bound, bound);
}

Tensor2 Linear::forward(const Tensor2& x) const {
  Tensor2 y = x * w.value.transpose();
  y.rowwise() += b.value.row(0);
  return y;
}

Tensor2 Linear::backward(const Tensor2& x, const Tensor2& dy) {
  w.grad.noalias() += dy.transpose() * x;
  b.grad += dy.colwise().sum();
  return dy * w.value;
}

void Linear::collect(ParamRefs& out) {
  out.push_back(&w);
  out.push_back(&b);
}

void Linear::collect(ConstParamRefs& out) const {
  out.push_back(&w);
  out.push_back(&b);
}

// ---- LayerNorm ------------------------------------------------------------

LayerNorm::LayerNorm(const std::string& name, int dim)
    : gamma(name + ".gamma", 1, dim), beta(name + ".beta", 1, dim) {
  gamma.value.setOnes();
}

Tensor2 LayerNorm::forward(const Tensor2& x, Cache* cache) const {
  const auto d = static_cast<double>(x.cols());
  Tensor2 xhat(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).sum() / d;
    const auto centered = (x.row(r).array() - mu).matrix();
    const double var = centered.squaredNorm() / d;
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std(r);
  }
  Tensor2 y = xhat.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  if (cache) {
    cache->xhat = xhat;
    cache->inv_std = inv_std;
  }
  return y;
}

Tensor2 LayerNorm::backward(const Cache& cache, const Tensor2& dy) {
  const auto& xhat = cache.xhat;
  gamma.grad += (dy.array() * xhat.array()).colwise().sum().matrix();
  beta.grad += dy.colwise().sum();
  const Tensor2 dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Tensor2 dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double s1 = dxhat.row(r).sum();
    const double s2 = dxhat.row(r).dot(xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / d) *
                (d * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2).matrix();
  }
  return dx;
}

void LayerNorm::collect(ParamRefs& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

void LayerNorm::collect(ConstParamRefs& out) const {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---- SetEncoder -----------------------------------------------------------

SetEncoder::SetEncoder(const std::string& name, int in_dim, int hidden, int n_heads)
    : in(name + ".in", in_dim, hidden),
      ln1(name + ".ln1", hidden),
      wq(name + ".wq", hidden, hidden),
      wk(name + ".wk", hidden, hidden),
      wv(name + ".wv", hidden, hidden),
      wo(name + ".wo", hidden, hidden),
      ln2(name + ".ln2", hidden),
      ff1(name + ".ff1", hidden, hidden),
      ff2(name + ".ff2", hidden, hidden),
      heads(n_heads) {}

void SetEncoder::init(Rng& rng) {
  for (Linear* l : {&in, &wq, &wk, &wv, &wo, &ff1, &ff2}) l->init(rng);
}

Tensor2 SetEncoder::forward(const Tensor2& x, const std::vector<std::uint8_t>& valid,
                            Cache* cache) const {
  const int hidden = in.out();
  Tensor2 out = Tensor2::Zero(x.rows(), hidden);
  std::vector<int> rows;
  if (valid.empty()) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) rows.push_back(static_cast<int>(r));
  } else {
    rows = flagged(valid);
  }
  if (cache) cache->rows = rows;
  if (rows.empty()) return out;

  const auto n = static_cast<Eigen::Index>(rows.size());
  Tensor2 xs(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) xs.row(i) = x.row(rows[i]);

  LayerNorm::Cache c1, c2;
  const Tensor2 x0 = in.forward(xs);
  const Tensor2 l1 = ln1.forward(x0, &c1);
  const Tensor2 q = wq.forward(l1);
  const Tensor2 k = wk.forward(l1);
  const Tensor2 v = wv.forward(l1);
  const int dh = hidden / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor2 cat(n, hidden);
  std::vector<Tensor2> probs;
  for (int h = 0; h < heads; ++h) {
    Tensor2 s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(s);
    cat.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
    probs.push_back(std::move(s));
  }
  const Tensor2 x1 = x0 + wo.forward(cat);
  const Tensor2 l2 = ln2.forward(x1, &c2);
  const Tensor2 f1 = ff1.forward(l2);
  const Tensor2 y = x1 + ff2.forward(relu(f1));
  for (Eigen::Index i = 0; i < n; ++i) out.row(rows[i]) = y.row(i);

  if (cache) {
    cache->x = xs;
    cache->x0 = x0;
    cache->l1 = l1;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->attn_cat = cat;
    cache->x1 = x1;
    cache->l2 = l2;
    cache->f1 = f1;
    cache->probs = std::move(probs);
    cache->ln1c = std::move(c1);
    cache->ln2c = std::move(c2);
  }
  return out;
}

void SetEncoder::backward(const Cache& c, const Tensor2& d_out) {
  if (c.rows.empty()) return;
  const auto n = static_cast<Eigen::Index>(c.rows.size());
  const int hidden = in.out();
  Tensor2 dy(n, hidden);
  for (Eigen::Index i = 0; i < n; ++i) dy.row(i) = d_out.row(c.rows[i]);

  const Tensor2 dr = ff2.backward(relu(c.f1), dy);
  const Tensor2 dl2 = ff1.backward(c.l2, relu_grad(c.f1, dr));
  const Tensor2 dx1 = dy + ln2.backward(c.ln2c, dl2);

  const Tensor2 dcat = wo.backward(c.attn_cat, dx1);
  const int dh = hidden / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor2 dq(n, hidden), dk(n, hidden), dv(n, hidden);
  for (int h = 0; h < heads; ++h) {
    const auto& p = c.probs[h];
    const auto doh = dcat.middleCols(h * dh, dh);
    const Tensor2 dp = doh * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh) = p.transpose() * doh;
    const Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
    const Tensor2 ds = (p.array() * (dp.array().colwise() - rowdot.array())).matrix() * scale;
    dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  const Tensor2 dl1 = wq.backward(c.l1, dq) + wk.backward(c.l1, dk) + wv.backward(c.l1, dv);
  const Tensor2 dx0 = dx1 + ln1.backward(c.ln1c, dl1);
  in.backward(c.x, dx0);
}

void SetEncoder::collect(ParamRefs& out) {
  in.collect(out);
  ln1.collect(out);
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
  ln2.collect(out);
  ff1.collect(out);
  ff2.collect(out);
}

void SetEncoder::collect(ConstParamRefs& out) const {
  in.collect(out);
  ln1.collect(out);
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
  ln2.collect(out);
  ff1.collect(out);
  ff2.collect(out);
}

// ---- Encoders -------------------------------------------------------------

void NetConfig::validate() const {
  if (hidden < 1) throw ConfigError("model.hidden: must be >= 1");
  if (critic_hidden < 0) throw ConfigError("model.critic_hidden: must be >= 0");
  if (heads < 1 || hidden % heads != 0) {
    throw ConfigError("model.heads: must be >= 1 and divide model.hidden");
  }
}

Encoders::Encoders(int hidden, int heads)
    : uav("enc.uav", kUavFeatures, hidden, heads),
      carrier("enc.carrier", kCarrierFeatures, hidden, heads),
      order("enc.order", kOrderFeatures, hidden, heads),
      sys("enc.sys", kSysFeatures, hidden) {}

void Encoders::init(Rng& rng) {
  uav.init(rng);
  carrier.init(rng);
  order.init(rng);
  sys.init(rng);
}

Embeddings Encoders::forward(const GlobalState& gs, Cache* cache) const {
  using ConstMap = Eigen::Map<const Tensor2>;
  const auto& caps = gs.caps;
  Embeddings e;
  e.u_valid = present(gs.uav_ids);
  e.c_valid = present(gs.carrier_ids);
  e.o_valid = gs.valid_order;
  const Tensor2 xu = ConstMap(gs.uav_seg.data(), caps.n_uav, kUavFeatures);
  const Tensor2 xc = ConstMap(gs.carrier_seg.data(), caps.n_carrier, kCarrierFeatures);
  const Tensor2 xo = ConstMap(gs.order_seg.data(), caps.n_max, kOrderFeatures);
  Tensor2 xs(1, kSysFeatures);
  for (int k = 0; k < kSysFeatures; ++k) xs(0, k) = gs.sys_seg[k];
  // An empty flag vector means "all rows", so fleets without members pass an
  // explicit all-zero selection instead.
  auto sel = [](const std::vector<std::uint8_t>& f, Eigen::Index n) {
    return f.empty() ? std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0) : f;
  };
  e.u = uav.forward(xu, sel(e.u_valid, caps.n_uav), cache ? &cache->u : nullptr);
  e.c = carrier.forward(xc, sel(e.c_valid, caps.n_carrier), cache ? &cache->c : nullptr);
  e.o = order.forward(xo, sel(e.o_valid, caps.n_max), cache ? &cache->o : nullptr);
  e.g = sys.forward(xs);
  if (cache) cache->sys_in = xs;
  return e;
}

void Encoders::backward(const Cache& cache, const Embeddings& d) {
  uav.backward(cache.u, d.u);
  carrier.backward(cache.c, d.c);
  order.backward(cache.o, d.o);
  sys.backward(cache.sys_in, d.g);
}

void Encoders::collect(ParamRefs& out) {
  uav.collect(out);
  carrier.collect(out);
  order.collect(out);
  sys.collect(out);
}

void Encoders::collect(ConstParamRefs& out) const {
  uav.collect(out);
  carrier.collect(out);
  order.collect(out);
  sys.collect(out);
}

RowVec masked_mean(const Tensor2& x, const std::vector<std::uint8_t>& valid) {
  RowVec m = RowVec::Zero(x.cols());
  int n = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (static_cast<std::size_t>(r) < valid.size() && valid[r]) {
      m += x.row(r);
      ++n;
    }
  }
  if (n > 0) m /= n;
  return m;
}

FusedContext fuse_contexts(const Embeddings& e, int order_slot) {
  const auto h = e.g.cols();
  FusedContext f;
  f.z.resize(4 * h);
  f.z << masked_mean(e.u, e.u_valid), masked_mean(e.c, e.c_valid), e.o.row(order_slot), e.g.row(0);
  auto ctx = [&](const Tensor2& v) {
    Tensor2 out(v.rows(), 3 * h);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      out.row(r) << v.row(r), e.o.row(order_slot), e.g.row(0);
    }
    return out;
  };
  f.u_o = ctx(e.u);
  f.c_o = ctx(e.c);
  return f;
}

// ---- Manager / Worker -----------------------------------------------------

Manager::Manager(int hidden)
    : ln("mgr.ln", 4 * hidden), l1("mgr.l1", 4 * hidden, hidden), l2("mgr.l2", hidden, 2) {}

void Manager::init(Rng& rng) {
  l1.init(rng);
  l2.init(rng);
}

void Manager::collect(ParamRefs& out) {
  ln.collect(out);
  l1.collect(out);
  l2.collect(out);
}

void Manager::collect(ConstParamRefs& out) const {
  ln.collect(out);
  l1.collect(out);
  l2.collect(out);
}

std::array<double, 2> manager_forward(const Manager& m, const RowVec& z) {
  Tensor2 logits = m.l2.forward(relu(m.l1.forward(m.ln.forward(z))));
  softmax_rows(logits);
  return {logits(0, 0), logits(0, 1)};
}

Worker::Worker(const std::string& name, int hidden)
    : phi(name + ".phi", 3 * hidden + kPairFeatures, hidden),
      psi(name + ".psi", 2, hidden),
      w1(name + ".w1", 2 * hidden, hidden),
      w2(name + ".w2", hidden, 1) {}

void Worker::init(Rng& rng) {
  phi.init(rng);
  psi.init(rng);
  w1.init(rng);
  w2.init(rng);
}

void Worker::collect(ParamRefs& out) {
  phi.collect(out);
  psi.collect(out);
  w1.collect(out);
  w2.collect(out);
}

void Worker::collect(ConstParamRefs& out) const {
  phi.collect(out);
  psi.collect(out);
  w1.collect(out);
  w2.collect(out);
}

double worker_forward(const Worker& w, std::span<const double> context,
                      std::span<const double> pair_features, const std::array<double, 2>& goal) {
  const auto nc = static_cast<Eigen::Index>(context.size());
  const auto np = static_cast<Eigen::Index>(pair_features.size());
  Tensor2 x(1, nc + np);
  for (Eigen::Index i = 0; i < nc; ++i) x(0, i) = context[i];
  for (Eigen::Index i = 0; i < np; ++i) x(0, nc + i) = pair_features[i];
  Tensor2 g(1, 2);
  g << goal[0], goal[1];
  const Tensor2 a = relu(w.phi.forward(x));
  const Tensor2 b = relu(w.psi.forward(g));
  Tensor2 q(1, a.cols() + b.cols());
  q << a, b;
  return std::tanh(w.w2.forward(relu(w.w1.forward(q)))(0, 0));
}

// ---- Critic ---------------------------------------------------------------

Critic::Critic(const std::string& name, int input_dim, int hidden)
    : l1(name + ".l1", input_dim, hidden), l2(name + ".l2", hidden, hidden), l3(name + ".l3", hidden, 1) {}

void Critic::init(Rng& rng) {
  l1.init(rng);
  l2.init(rng);
  l3.init(rng);
}

Eigen::VectorXd Critic::forward(const Tensor2& x, Cache* cache) const {
  const Tensor2 h1 = l1.forward(x);
  const Tensor2 h2 = l2.forward(relu(h1));
  const Tensor2 q = l3.forward(relu(h2));
  if (cache) {
    cache->x = x;
    cache->h1 = h1;
    cache->h2 = h2;
  }
  return q.col(0);
}

Tensor2 Critic::backward(const Cache& c, const Eigen::VectorXd& dq) {
  const Tensor2 dr2 = l3.backward(relu(c.h2), dq);
  const Tensor2 dr1 = l2.backward(relu(c.h1), relu_grad(c.h2, dr2));
  return l1.backward(c.x, relu_grad(c.h1, dr1));
}

Tensor2 Critic::input_grad(const Cache& c, const Eigen::VectorXd& dq) const {
  const Tensor2 dr2 = dq * l3.w.value;
  const Tensor2 dr1 = relu_grad(c.h2, dr2) * l2.w.value;
  return relu_grad(c.h1, dr1) * l1.w.value;
}

void Critic::collect(ParamRefs& out) {
  l1.collect(out);
  l2.collect(out);
  l3.collect(out);
}

void Critic::collect(ConstParamRefs& out) const {
  l1.collect(out);
  l2.collect(out);
  l3.collect(out);
}

// ---- Actor ----------------------------------------------------------------

Actor::Actor(const NetConfig& c)
    : cfg(c),
      enc(c.hidden, c.heads),
      manager(c.hidden),
      worker_uav("wrk.uav", c.hidden),
      worker_carrier("wrk.carrier", c.hidden) {
  cfg.validate();
}

void Actor::init(Rng& rng) {
  enc.init(rng);
  manager.init(rng);
  worker_uav.init(rng);
  worker_carrier.init(rng);
}

namespace {

/// Worker forward over every valid pair of one fleet. phi is applied to
/// [V[v] | O[o] | G | pf] by splitting its weight into blocks, so the dense
/// per-vehicle and per-order parts are computed once instead of per pair.
void worker_pass(const Worker& w, const Tensor2& vehicles, int col_offset, const GlobalState& gs,
                 const Embeddings& e, const Tensor2& goals_in, const std::vector<int>& slots,
                 Tensor2& raw, Actor::WorkerCache& wc) {
  const auto h = e.g.cols();
  const int nv = static_cast<int>(vehicles.rows());
  wc.pair_slot.clear();
  wc.pair_vehicle.clear();
  for (const int s : slots) {
    for (int v = 0; v < nv; ++v) {
      if (gs.pair_valid[gs.pair_index(s, col_offset + v)]) {
        wc.pair_slot.push_back(s);
        wc.pair_vehicle.push_back(v);
      }
    }
  }
  const auto p = static_cast<Eigen::Index>(wc.pair_slot.size());
  wc.pf.resize(p, kPairFeatures);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto idx = gs.pair_index(wc.pair_slot[i], col_offset + wc.pair_vehicle[i]);
    for (int k = 0; k < kPairFeatures; ++k) wc.pf(i, k) = gs.pair_feat[idx * kPairFeatures + k];
  }
  wc.psi = w.psi.forward(goals_in);
  if (p == 0) {
    wc.phi.resize(0, h);
    wc.hpre.resize(0, h);
    wc.score.resize(0, 1);
    return;
  }
  const auto& W = w.phi.w.value;
  const Tensor2 pa = vehicles * W.leftCols(h).transpose();
  const Tensor2 pb = e.o * W.middleCols(h, h).transpose();
  RowVec gb = e.g.row(0) * W.middleCols(2 * h, h).transpose();
  gb += w.phi.b.value.row(0);
  wc.phi.noalias() = wc.pf * W.rightCols(kPairFeatures).transpose();
  for (Eigen::Index i = 0; i < p; ++i) {
    wc.phi.row(i) += pa.row(wc.pair_vehicle[i]) + pb.row(wc.pair_slot[i]) + gb;
  }
  const auto& W1 = w.w1.w.value;
  const Tensor2 ps = relu(wc.psi) * W1.rightCols(h).transpose();
  wc.hpre.noalias() = relu(wc.phi) * W1.leftCols(h).transpose();
  for (Eigen::Index i = 0; i < p; ++i) {
    wc.hpre.row(i) += ps.row(wc.pair_slot[i]) + w.w1.b.value.row(0);
  }
  wc.score = w.w2.forward(relu(wc.hpre)).array().tanh().matrix();
  for (Eigen::Index i = 0; i < p; ++i) {
    raw(wc.pair_slot[i], col_offset + wc.pair_vehicle[i]) = wc.score(i, 0);
  }
}

void worker_pass_backward(Worker& w, const Tensor2& vehicles, int col_offset,
                          const Embeddings& e, const Tensor2& goals_in,
                          const Actor::WorkerCache& wc, const Tensor2& d_raw, double decay,
                          Tensor2& d_vehicles, Embeddings& d) {
  const auto p = static_cast<Eigen::Index>(wc.pair_slot.size());
  if (p == 0) return;
  const auto h = e.g.cols();
  const auto n_slots = e.o.rows();

  Tensor2 da(p, 1);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double s = wc.score(i, 0);
    da(i, 0) = d_raw(wc.pair_slot[i], col_offset + wc.pair_vehicle[i]) * (1.0 - s * s) + decay * s;
  }
  const Tensor2 dhh = w.w2.backward(relu(wc.hpre), da);
  const Tensor2 dh = relu_grad(wc.hpre, dhh);

  Tensor2 ds = Tensor2::Zero(n_slots, h);
  for (Eigen::Index i = 0; i < p; ++i) ds.row(wc.pair_slot[i]) += dh.row(i);
  const Tensor2 rphi = relu(wc.phi);
  const Tensor2 rpsi = relu(wc.psi);
  w.w1.w.grad.leftCols(h).noalias() += dh.transpose() * rphi;
  w.w1.w.grad.rightCols(h).noalias() += ds.transpose() * rpsi;
  w.w1.b.grad += dh.colwise().sum();
  const auto& W1 = w.w1.w.value;
  const Tensor2 drphi = dh * W1.leftCols(h);
  const Tensor2 drpsi = ds * W1.rightCols(h);

  // Goals are inputs here; their gradient is dropped on purpose.
  w.psi.backward(goals_in, relu_grad(wc.psi, drpsi));

  const Tensor2 dphi = relu_grad(wc.phi, drphi);
  Tensor2 dv = Tensor2::Zero(vehicles.rows(), h);
  Tensor2 dso = Tensor2::Zero(n_slots, h);
  for (Eigen::Index i = 0; i < p; ++i) {
    dv.row(wc.pair_vehicle[i]) += dphi.row(i);
    dso.row(wc.pair_slot[i]) += dphi.row(i);
  }
  const RowVec dsum = dphi.colwise().sum();
  auto& G = w.phi.w.grad;
  G.leftCols(h).noalias() += dv.transpose() * vehicles;
  G.middleCols(h, h).noalias() += dso.transpose() * e.o;
  G.middleCols(2 * h, h).noalias() += dsum.transpose() * e.g.row(0);
  G.rightCols(kPairFeatures).noalias() += dphi.transpose() * wc.pf;
  w.phi.b.grad += dsum;

  const auto& W = w.phi.w.value;
  d_vehicles.noalias() += dv * W.leftCols(h);
  d.o.noalias() += dso * W.middleCols(h, h);
  d.g.noalias() += dsum * W.middleCols(2 * h, h);
}

}  // namespace

ActorOutput Actor::forward(const GlobalState& gs, const Tensor2* goal_override, Cache* cache,
                           const GoalPerturb& perturb) const {
  const auto& caps = gs.caps;
  Cache local;
  Cache& c = cache ? *cache : local;
  c.emb = enc.forward(gs, &c.enc);
  const Embeddings& e = c.emb;
  c.order_slots = flagged(gs.valid_order);
  const auto& slots = c.order_slots;

  ActorOutput out;
  out.goals = Tensor2::Zero(caps.n_max, 2);
  out.logits = Tensor2::Zero(caps.n_max, 2);
  if (cfg.hierarchy && !slots.empty()) {
    const auto h = e.g.cols();
    const RowVec pu = masked_mean(e.u, e.u_valid);
    const RowVec pc = masked_mean(e.c, e.c_valid);
    c.z.resize(static_cast<Eigen::Index>(slots.size()), 4 * h);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      c.z.row(static_cast<Eigen::Index>(i)) << pu, pc, e.o.row(slots[i]), e.g.row(0);
    }
    c.lnz = manager.ln.forward(c.z, &c.lnc);
    c.m1 = manager.l1.forward(c.lnz);
    c.logits = manager.l2.forward(relu(c.m1));
    const Tensor2& logits = c.logits;
    Tensor2 g = logits;
    softmax_rows(g);
    c.goals = g;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      out.logits.row(slots[i]) = logits.row(static_cast<Eigen::Index>(i));
      out.goals.row(slots[i]) = g.row(static_cast<Eigen::Index>(i));
    }
  }

  if (cfg.hierarchy) {
    out.goals_in = goal_override ? *goal_override : out.goals;
    if (perturb) perturb(out.goals_in, out.logits);
  } else {
    out.goals_in = Tensor2::Zero(caps.n_max, 2);
  }
  c.goals_in = out.goals_in;

  out.raw_scores = Tensor2::Zero(caps.n_max, caps.vehicles());
  const Worker& carrier_worker = cfg.hierarchy ? worker_carrier : worker_uav;
  worker_pass(worker_uav, e.u, 0, gs, e, out.goals_in, slots, out.raw_scores, c.wu);
  worker_pass(carrier_worker, e.c, caps.n_uav, gs, e, out.goals_in, slots, out.raw_scores, c.wc);
  return out;
}

void Actor::backward(const GlobalState& gs, const Cache& c, const Tensor2& d_goals,
                     const Tensor2& d_raw_scores, double preact_decay) {
  const auto& e = c.emb;
  const auto h = e.g.cols();
  Embeddings d;
  d.u = Tensor2::Zero(e.u.rows(), h);
  d.c = Tensor2::Zero(e.c.rows(), h);
  d.o = Tensor2::Zero(e.o.rows(), h);
  d.g = Tensor2::Zero(1, h);

  Worker& carrier_worker = cfg.hierarchy ? worker_carrier : worker_uav;
  worker_pass_backward(worker_uav, e.u, 0, e, c.goals_in, c.wu, d_raw_scores, preact_decay, d.u, d);
  worker_pass_backward(carrier_worker, e.c, gs.caps.n_uav, e, c.goals_in, c.wc, d_raw_scores,
                       preact_decay, d.c, d);

  const auto& slots = c.order_slots;
  if (cfg.hierarchy && !slots.empty()) {
    const auto n = static_cast<Eigen::Index>(slots.size());
    Tensor2 dlogits(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto g = c.goals.row(i);
      const auto dg = d_goals.row(slots[i]);
      const double dot = g.dot(dg);
      dlogits.row(i) = (g.array() * (dg.array() - dot)).matrix() + preact_decay * c.logits.row(i);
    }
    const Tensor2 dmr = manager.l2.backward(relu(c.m1), dlogits);
    const Tensor2 dlnz = manager.l1.backward(c.lnz, relu_grad(c.m1, dmr));
    const Tensor2 dz = manager.ln.backward(c.lnc, dlnz);

    auto spread = [&](Tensor2& dst, const std::vector<std::uint8_t>& valid, Eigen::Index col) {
      const auto cnt = std::count(valid.begin(), valid.end(), std::uint8_t{1});
      if (cnt == 0) return;
      const RowVec share = dz.middleCols(col, h).colwise().sum() / static_cast<double>(cnt);
      for (std::size_t r = 0; r < valid.size(); ++r) {
        if (valid[r]) dst.row(static_cast<Eigen::Index>(r)) += share;
      }
    };
    spread(d.u, e.u_valid, 0);
    spread(d.c, e.c_valid, h);
    for (Eigen::Index i = 0; i < n; ++i) d.o.row(slots[i]) += dz.row(i).segment(2 * h, h);
    d.g += dz.middleCols(3 * h, h).colwise().sum();
  }
  enc.backward(c.enc, d);
}

void Actor::collect(ParamRefs& out) {
  enc.collect(out);
  manager.collect(out);
  worker_uav.collect(out);
  worker_carrier.collect(out);
}

void Actor::collect(ConstParamRefs& out) const {
  enc.collect(out);
  manager.collect(out);
  worker_uav.collect(out);
  worker_carrier.collect(out);
}

void Actor::collect_manager(ParamRefs& out) { manager.collect(out); }

void Actor::collect_workers(ParamRefs& out) {
  worker_uav.collect(out);
  worker_carrier.collect(out);
}

void Actor::collect_encoders(ParamRefs& out) { enc.collect(out); }

// ---- Critic featurization -------------------------------------------------

int state_feature_dim(const Caps& caps) {
  return caps.n_max * (kOrderFeatures + 1) + caps.n_uav * kUavFeatures +
         caps.n_carrier * kCarrierFeatures + kSysFeatures;
}

int manager_action_dim(const Caps& caps) { return caps.n_max * 2; }

int worker_action_channels(const NetConfig& cfg) {
  return 2 + (cfg.critic_pair_features ? kPairFeatures : 0);
}

int worker_action_dim(const Caps& caps, const NetConfig& cfg) {
  return caps.n_max * caps.vehicles() * worker_action_channels(cfg);
}

void write_state_features(const GlobalState& gs, std::span<double> out) {
  std::size_t k = 0;
  for (int s = 0; s < gs.caps.n_max; ++s) {
    for (int f = 0; f < kOrderFeatures; ++f) out[k++] = gs.order_seg[s * kOrderFeatures + f];
    out[k++] = gs.valid_order[s] ? 1.0 : 0.0;
  }
  for (const double v : gs.uav_seg) out[k++] = v;
  for (const double v : gs.carrier_seg) out[k++] = v;
  for (const double v : gs.sys_seg) out[k++] = v;
}

void write_manager_action(const GlobalState& gs, const Tensor2& goals, std::span<double> out) {
  for (int s = 0; s < gs.caps.n_max; ++s) {
    out[2 * s] = gs.valid_order[s] ? goals(s, 0) : 0.0;
    out[2 * s + 1] = gs.valid_order[s] ? goals(s, 1) : 0.0;
  }
}

void write_worker_action(const GlobalState& gs, const NetConfig& cfg, const Tensor2& shifted,
                         std::span<double> out) {
  const int ch = worker_action_channels(cfg);
  const int m = gs.caps.vehicles();
  std::size_t k = 0;
  for (int s = 0; s < gs.caps.n_max; ++s) {
    for (int v = 0; v < m; ++v) {
      const auto idx = gs.pair_index(s, v);
      const bool ok = gs.pair_valid[idx] != 0;
      out[k] = ok ? shifted(s, v) : 0.0;
      out[k + 1] = ok ? 1.0 : 0.0;
      for (int f = 2; f < ch; ++f) out[k + f] = ok ? gs.pair_feat[idx * kPairFeatures + (f - 2)] : 0.0;
      k += static_cast<std::size_t>(ch);
    }
  }
}

// ---- PolicyParams ---------------------------------------------------------

PolicyParams::PolicyParams(const NetConfig& c, const Caps& k, std::uint64_t seed)
    : cfg(c),
      caps(k),
      actor(c),
      critic_m("critic_m", state_feature_dim(k) + manager_action_dim(k), c.critic_width()),
      critic_w("critic_w", state_feature_dim(k) + worker_action_dim(k, c), c.critic_width()) {
  Rng rng(seed);
  actor.init(rng);
  critic_m.init(rng);
  critic_w.init(rng);
  actor_target = actor;
  critic_m_target = critic_m;
  critic_w_target = critic_w;
}

ParamRefs PolicyParams::online() {
  ParamRefs out;
  actor.collect(out);
  critic_m.collect(out);
  critic_w.collect(out);
  return out;
}

ParamRefs PolicyParams::target() {
  ParamRefs out;
  actor_target.collect(out);
  critic_m_target.collect(out);
  critic_w_target.collect(out);
  return out;
}

ConstParamRefs PolicyParams::online() const {
  ConstParamRefs out;
  actor.collect(out);
  critic_m.collect(out);
  critic_w.collect(out);
  return out;
}

ConstParamRefs PolicyParams::target() const {
  ConstParamRefs out;
  actor_target.collect(out);
  critic_m_target.collect(out);
  critic_w_target.collect(out);
  return out;
}

ConstParamRefs PolicyParams::all() const {
  auto out = online();
  const auto t = target();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

ParamRefs PolicyParams::all() {
  auto out = online();
  const auto t = target();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

void PolicyParams::sync_targets() {
  actor_target = actor;
  critic_m_target = critic_m;
  critic_w_target = critic_w;
}

// ---- Scoring --------------------------------------------------------------

ScoredDecision score_all(const Actor& actor, const GlobalState& gs, const FeasibilityMask& mask,
                         double explore_noise, Rng& rng) {
  const auto& caps = gs.caps;
  Actor::GoalPerturb perturb;
  if (explore_noise > 0.0) {
    perturb = [&](Tensor2& goals_in, const Tensor2& logits) {
      for (int s = 0; s < caps.n_max; ++s) {
        if (!gs.valid_order[s]) continue;
        Tensor2 l = logits.row(s);
        for (int k = 0; k < 2; ++k) l(0, k) += rng.normal(0.0, explore_noise);
        softmax_rows(l);
        goals_in.row(s) = l.row(0);
      }
    };
  }
  const auto out = actor.forward(gs, nullptr, nullptr, perturb);

  ScoredDecision d;
  d.scores = ScoreMatrix::masked_like(mask);
  d.goals_slots = out.goals_in;
  d.shifted_slots = Tensor2::Zero(caps.n_max, caps.vehicles());

  std::vector<int> uav_col(static_cast<std::size_t>(caps.n_uav), -1);
  std::vector<int> carrier_col(static_cast<std::size_t>(caps.n_carrier), -1);
  for (int i = 0; i < caps.n_uav; ++i) {
    const auto it = std::find(mask.uav_cols.begin(), mask.uav_cols.end(), gs.uav_ids[i]);
    if (gs.uav_ids[i] >= 0 && it != mask.uav_cols.end()) {
      uav_col[i] = static_cast<int>(it - mask.uav_cols.begin());
    }
  }
  for (int i = 0; i < caps.n_carrier; ++i) {
    const auto it = std::find(mask.carrier_cols.begin(), mask.carrier_cols.end(), gs.carrier_ids[i]);
    if (gs.carrier_ids[i] >= 0 && it != mask.carrier_cols.end()) {
      carrier_col[i] =
          static_cast<int>(mask.uav_cols.size()) + static_cast<int>(it - mask.carrier_cols.begin());
    }
  }

  for (int s = 0; s < caps.n_max; ++s) {
    if (!gs.valid_order[s]) continue;
    const OrderId id = gs.order_ids[s];
    const std::array<double, 2> goal{out.goals_in(s, 0), out.goals_in(s, 1)};
    if (actor.cfg.hierarchy) d.goals[id] = goal;
    const auto row_it = std::find(mask.orders.begin(), mask.orders.end(), id);
    if (row_it == mask.orders.end()) continue;
    const auto r = static_cast<std::size_t>(row_it - mask.orders.begin());
    for (int v = 0; v < caps.vehicles(); ++v) {
      if (!gs.pair_valid[gs.pair_index(s, v)]) continue;
      const bool is_uav = v < caps.n_uav;
      const int c = is_uav ? uav_col[v] : carrier_col[v - caps.n_uav];
      if (c < 0 || !mask.at(r, static_cast<std::size_t>(c))) continue;
      double raw = out.raw_scores(s, v);
      if (explore_noise > 0.0) raw = std::clamp(raw + rng.normal(0.0, explore_noise), -1.0, 1.0);
      const double shifted = (raw + 1.0) / 2.0;
      d.shifted_slots(s, v) = shifted;
      if (actor.cfg.hierarchy && actor.cfg.strict_goal_mask &&
          goal_mode(goal) != (is_uav ? VehicleKind::Uav : VehicleKind::Carrier)) {
        continue;
      }
      d.scores.at(r, static_cast<std::size_t>(c)) = shifted;
    }
  }
  return d;
}

// ---- Checkpoints ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'H', 'R', 'L', '4', 'A', 'G', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw InputError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::string checkpoint_bytes(const PolicyParams& params) {
  const auto tensors = params.all();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto* p : tensors) {
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
  }
  for (const auto* p : tensors) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p->value.data()[i])));
    }
  }
  return out;
}

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot write checkpoint " + path);
  const auto bytes = checkpoint_bytes(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FileError("failed writing checkpoint " + path);
}

void load_checkpoint(PolicyParams& params, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open checkpoint " + path);
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
    throw InputError(path + ": not an HRL4AG01 checkpoint");
  }
  std::size_t pos = sizeof kMagic;
  auto tensors = params.all();
  const auto count = get_u32(in, pos);
  if (count != tensors.size()) {
    throw InputError(path + ": tensor count " + std::to_string(count) + " does not match network (" +
                     std::to_string(tensors.size()) + ")");
  }
  for (auto* p : tensors) {
    const auto rows = get_u32(in, pos);
    const auto cols = get_u32(in, pos);
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw InputError(path + ": shape mismatch for " + p->name);
    }
  }
  std::size_t values = 0;
  for (const auto* p : tensors) values += static_cast<std::size_t>(p->value.size());
  // Checked up front so a bad file never leaves the parameters half loaded.
  if (in.size() < pos + 4 * values) throw InputError(path + ": truncated parameter data");
  if (in.size() > pos + 4 * values) throw InputError(path + ": trailing bytes after parameter data");
  for (auto* p : tensors) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      p->value.data()[i] = static_cast<double>(std::bit_cast<float>(get_u32(in, pos)));
    }
  }
}

std::uint64_t param_hash(const ConstParamRefs& params) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto* p : params) {
    const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    mix(shape, sizeof shape);
    mix(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return h;
}

std::uint64_t param_hash(const ParamRefs& params) {
  return param_hash(ConstParamRefs(params.begin(), params.end()));
}

}  // namespace airground::nn
