#include "airground/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "airground/engine.hpp"
#include "airground/errors.hpp"
#include "airground/policy.hpp"

namespace airground {

// ---- Replay buffer --------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("training.buffer_capacity: must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  std::lock_guard lock(mutex_);
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

std::optional<std::vector<const Transition*>> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::lock_guard lock(mutex_);
  if (items_.size() < n || items_.empty()) return std::nullopt;
  std::vector<const Transition*> out;
  out.reserve(n);
  const auto last = static_cast<std::int64_t>(items_.size()) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(&items_[static_cast<std::size_t>(rng.uniform_int(0, last))]);
  }
  return out;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  std::lock_guard lock(mutex_);
  if (i >= items_.size()) throw ContractViolation("replay index out of range");
  return items_.size() < capacity_ ? items_[i] : items_[(head_ + i) % capacity_];
}

// ---- Configuration --------------------------------------------------------

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(batch_size >= 1, "training.batch_size: must be >= 1");
  require(lr_actor > 0.0 && std::isfinite(lr_actor), "training.lr_actor: must be > 0");
  require(lr_critic > 0.0 && std::isfinite(lr_critic), "training.lr_critic: must be > 0");
  require(tau > 0.0 && tau <= 1.0, "training.tau: must lie in (0, 1]");
  require(buffer_capacity >= 1, "training.buffer_capacity: must be >= 1");
  require(episodes >= 0, "training.episodes: must be >= 0");
  require(update_every >= 1, "training.update_every: must be >= 1");
  require(noise_start >= 0.0 && noise_end >= 0.0, "training.noise: must be >= 0");
  require(noise_decay_episodes >= 0, "training.noise_decay_episodes: must be >= 0");
  require(grad_clip >= 0.0, "training.grad_clip: must be >= 0");
  require(reward_scale > 0.0 && std::isfinite(reward_scale), "training.reward_scale: must be > 0");
  require(preact_decay >= 0.0 && std::isfinite(preact_decay), "training.preact_decay: must be >= 0");
  require(checkpoint_every >= 0, "training.checkpoint_every: must be >= 0");
}

double TrainConfig::noise_at(int episode) const {
  const int span = noise_decay_episodes > 0 ? noise_decay_episodes : episodes;
  const double frac = std::min(1.0, static_cast<double>(episode) / std::max(span - 1, 1));
  return noise_start + (noise_end - noise_start) * frac;
}

// ---- Optimizers -----------------------------------------------------------

Optimizer::Optimizer(OptimizerKind kind, double lr, double clip) : kind_(kind), lr_(lr), clip_(clip) {}

double Optimizer::step(const nn::ParamRefs& params) {
  const double norm = clip_ > 0.0 ? nn::clip_grad_norm(params, clip_) : nn::grad_norm(params);
  if (!std::isfinite(norm)) throw TrainingFault("non-finite gradient norm");
  if (kind_ == OptimizerKind::Sgd) {
    for (auto* p : params) p->value -= lr_ * p->grad;
  } else {
    if (owners_.size() != params.size() ||
        !std::equal(owners_.begin(), owners_.end(), params.begin())) {
      owners_.assign(params.begin(), params.end());
      moments_.clear();
      for (const auto* p : params) {
        moments_.push_back({nn::Tensor2::Zero(p->value.rows(), p->value.cols()),
                            nn::Tensor2::Zero(p->value.rows(), p->value.cols())});
      }
      t_ = 0;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = moments_[i];
      const auto& g = params[i]->grad;
      m.m = b1 * m.m + (1.0 - b1) * g;
      m.v = b2 * m.v + (1.0 - b2) * g.cwiseProduct(g);
      params[i]->value.array() -=
          lr_ * (m.m.array() / c1) / ((m.v.array() / c2).sqrt() + eps);
    }
  }
  nn::zero_grads(params);
  return norm;
}

Optimizers::Optimizers(const TrainConfig& cfg)
    : critic_m(cfg.optimizer, cfg.lr_critic, cfg.grad_clip),
      critic_w(cfg.optimizer, cfg.lr_critic, cfg.grad_clip),
      actor(cfg.optimizer, cfg.lr_actor, cfg.grad_clip) {}

// ---- Updates --------------------------------------------------------------

namespace {

using nn::Tensor2;

Tensor2 shifted_scores(const GlobalState& gs, const Tensor2& raw) {
  Tensor2 out = Tensor2::Zero(raw.rows(), raw.cols());
  for (Eigen::Index s = 0; s < raw.rows(); ++s) {
    for (Eigen::Index v = 0; v < raw.cols(); ++v) {
      if (gs.pair_valid[gs.pair_index(static_cast<int>(s), static_cast<int>(v))]) {
        out(s, v) = (raw(s, v) + 1.0) / 2.0;
      }
    }
  }
  return out;
}

/// Critic inputs for a batch: state features followed by the action block.
struct CriticInputs {
  Tensor2 xm, xw;
};

CriticInputs critic_inputs(const nn::PolicyParams& p, std::size_t rows) {
  const int ds = nn::state_feature_dim(p.caps);
  const auto n = static_cast<Eigen::Index>(rows);
  return {Tensor2::Zero(n, ds + nn::manager_action_dim(p.caps)),
          Tensor2::Zero(n, ds + nn::worker_action_dim(p.caps, p.cfg))};
}

void fill_row(const nn::PolicyParams& p, CriticInputs& in, Eigen::Index row, const GlobalState& gs,
              const Tensor2& goals, const Tensor2& shifted) {
  const auto ds = static_cast<std::size_t>(nn::state_feature_dim(p.caps));
  std::span<double> m(in.xm.row(row).data(), static_cast<std::size_t>(in.xm.cols()));
  std::span<double> w(in.xw.row(row).data(), static_cast<std::size_t>(in.xw.cols()));
  nn::write_state_features(gs, m.first(ds));
  nn::write_state_features(gs, w.first(ds));
  nn::write_manager_action(gs, goals, m.subspan(ds));
  nn::write_worker_action(gs, p.cfg, shifted, w.subspan(ds));
}

nn::ParamRefs refs(nn::Critic& c) {
  nn::ParamRefs out;
  c.collect(out);
  return out;
}

}  // namespace

void critic_targets(const nn::PolicyParams& params, std::span<const Transition* const> batch,
                    const RewardWeights& w, double reward_scale, std::vector<double>& y_m,
                    std::vector<double>& y_w) {
  const auto n = batch.size();
  y_m.assign(n, 0.0);
  y_w.assign(n, 0.0);
  std::vector<std::size_t> boot;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = *batch[i];
    y_m[i] = reward_scale * t.r_ex;
    y_w[i] = reward_scale * hybrid_reward(t.r_ex, t.r_in, w);
    if (!t.done) boot.push_back(i);
  }
  if (boot.empty()) return;
  auto in = critic_inputs(params, boot.size());
  for (std::size_t k = 0; k < boot.size(); ++k) {
    const auto& s = *batch[boot[k]]->s_next;
    const auto out = params.actor_target.forward(s);
    fill_row(params, in, static_cast<Eigen::Index>(k), s, out.goals, shifted_scores(s, out.raw_scores));
  }
  const auto qm = params.critic_m_target.forward(in.xm);
  const auto qw = params.critic_w_target.forward(in.xw);
  for (std::size_t k = 0; k < boot.size(); ++k) {
    y_m[boot[k]] += w.gamma * qm(static_cast<Eigen::Index>(k));
    y_w[boot[k]] += w.gamma * qw(static_cast<Eigen::Index>(k));
  }
}

CriticLosses critic_update(nn::PolicyParams& params, std::span<const Transition* const> batch,
                           const RewardWeights& w, Optimizers& opt, double reward_scale) {
  std::vector<double> y_m, y_w;
  critic_targets(params, batch, w, reward_scale, y_m, y_w);
  auto in = critic_inputs(params, batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = *batch[i];
    fill_row(params, in, static_cast<Eigen::Index>(i), *t.s, t.a_m, t.a_w);
  }
  const auto n = static_cast<double>(batch.size());
  const Eigen::Map<const Eigen::VectorXd> ym(y_m.data(), static_cast<Eigen::Index>(y_m.size()));
  const Eigen::Map<const Eigen::VectorXd> yw(y_w.data(), static_cast<Eigen::Index>(y_w.size()));

  nn::Critic::Cache cm, cw;
  const Eigen::VectorXd rm = params.critic_m.forward(in.xm, &cm) - ym;
  const Eigen::VectorXd rw = params.critic_w.forward(in.xw, &cw) - yw;
  CriticLosses losses{rm.squaredNorm() / n, rw.squaredNorm() / n};
  if (!std::isfinite(losses.loss_m) || !std::isfinite(losses.loss_w)) {
    throw TrainingFault("non-finite critic loss");
  }
  auto pm = refs(params.critic_m);
  auto pw = refs(params.critic_w);
  nn::zero_grads(pm);
  nn::zero_grads(pw);
  params.critic_m.backward(cm, (2.0 / n) * rm);
  params.critic_w.backward(cw, (2.0 / n) * rw);
  // Check both before stepping either so a fault leaves parameters untouched.
  if (!std::isfinite(nn::grad_norm(pm)) || !std::isfinite(nn::grad_norm(pw))) {
    throw TrainingFault("non-finite critic gradient");
  }
  opt.critic_m.step(pm);
  opt.critic_w.step(pw);
  return losses;
}

ActorGradNorms actor_gradients(nn::PolicyParams& params, std::span<const Transition* const> batch,
                               double preact_decay) {
  auto& actor = params.actor;
  nn::ParamRefs all;
  actor.collect(all);
  nn::zero_grads(all);
  if (batch.empty()) return {};

  const auto& caps = params.caps;
  std::vector<nn::Actor::Cache> caches(batch.size());
  auto in = critic_inputs(params, batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = *batch[i]->s;
    const auto out = actor.forward(s, nullptr, &caches[i]);
    fill_row(params, in, static_cast<Eigen::Index>(i), s, out.goals, shifted_scores(s, out.raw_scores));
  }
  nn::Critic::Cache cm, cw;
  params.critic_m.forward(in.xm, &cm);
  params.critic_w.forward(in.xw, &cw);
  // Loss is -mean Q over the batch.
  const Eigen::VectorXd dq =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(batch.size()), -1.0 / batch.size());
  const Tensor2 dxm = params.critic_m.input_grad(cm, dq);
  const Tensor2 dxw = params.critic_w.input_grad(cw, dq);

  const int ds = nn::state_feature_dim(caps);
  const int ch = nn::worker_action_channels(params.cfg);
  const int m = caps.vehicles();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = *batch[i]->s;
    const auto row = static_cast<Eigen::Index>(i);
    Tensor2 d_goals = Tensor2::Zero(caps.n_max, 2);
    Tensor2 d_raw = Tensor2::Zero(caps.n_max, m);
    for (int o = 0; o < caps.n_max; ++o) {
      if (!s.valid_order[o]) continue;
      d_goals(o, 0) = dxm(row, ds + 2 * o);
      d_goals(o, 1) = dxm(row, ds + 2 * o + 1);
      for (int v = 0; v < m; ++v) {
        const auto idx = s.pair_index(o, v);
        // shifted = (raw + 1) / 2
        if (s.pair_valid[idx]) d_raw(o, v) = 0.5 * dxw(row, ds + static_cast<Eigen::Index>(idx) * ch);
      }
    }
    actor.backward(s, caches[i], d_goals, d_raw, preact_decay / batch.size());
  }
  nn::ParamRefs mgr, wrk;
  actor.collect_manager(mgr);
  actor.collect_workers(wrk);
  return {nn::grad_norm(mgr), nn::grad_norm(wrk)};
}

ActorGradNorms actor_update(nn::PolicyParams& params, std::span<const Transition* const> batch,
                            Optimizers& opt, double preact_decay) {
  const auto norms = actor_gradients(params, batch, preact_decay);
  nn::ParamRefs all;
  params.actor.collect(all);
  opt.actor.step(all);
  return norms;
}

void soft_update(nn::PolicyParams& params, double tau) {
  const auto online = params.online();
  const auto target = params.target();
  for (std::size_t i = 0; i < online.size(); ++i) {
    if (tau == 1.0) {
      target[i]->value = online[i]->value;
    } else {
      target[i]->value = tau * online[i]->value + (1.0 - tau) * target[i]->value;
    }
  }
}

// ---- Training loop --------------------------------------------------------

std::string curve_json(const EpisodeCurve& c) {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  j["episode"] = c.episode;
  j["pn"] = c.pn;
  j["dn"] = c.dn;
  j["loss_m"] = opt(c.loss_m);
  j["loss_w"] = opt(c.loss_w);
  j["grad_m"] = opt(c.grad_m);
  j["grad_w"] = opt(c.grad_w);
  j["epsilon"] = c.epsilon;
  return j.dump();
}

Caps caps_for(const ScenarioConfig& config) {
  return {config.n_max, config.fleet.n_uav, config.fleet.n_carrier};
}

TrainResult train(nn::PolicyParams& params, const TrainConfig& cfg, const Scenario& scenario,
                  const RewardWeights& weights, std::uint64_t seed, const TrainOutputs& outputs) {
  cfg.validate();
  weights.validate();
  auto scen = std::make_shared<const Scenario>(scenario);
  Engine engine(scen, EngineOptions{.measure_time = false, .trace = nullptr});
  const auto& scfg = scenario.config;
  HierarchicalPolicy policy(params.actor, params.caps, scfg.max_speed_kmh(), scfg.energy);
  ReplayBuffer buffer(cfg.buffer_capacity);
  Optimizers opt(cfg);
  Rng sample_rng(derive_seed(seed, 0x5a3e));
  const bool hierarchy = params.cfg.hierarchy;
  const auto min_fill = std::max(cfg.warmup, static_cast<std::size_t>(cfg.batch_size));

  auto save = [&](const std::string& path) {
    if (!path.empty()) nn::save_checkpoint(params, path);
  };

  TrainResult result;
  long steps = 0;
  try {
    for (int ep = 0; ep < cfg.episodes; ++ep) {
      const double noise = cfg.noise_at(ep);
      policy.set_noise(noise);
      const auto ep_seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(ep));
      engine.reset(ep_seed);
      policy.begin_episode(ep_seed);
      const auto norm = Normalizer::for_world(engine.state(), scfg.max_speed_kmh());

      int cum_matched = 0;
      double sum_lm = 0, sum_lw = 0, sum_gm = 0, sum_gw = 0;
      int n_updates = 0;
      std::shared_ptr<const GlobalState> current;
      while (!engine.done()) {
        engine.prepare();
        const auto report = engine.step(policy);
        if (!current) current = std::make_shared<const GlobalState>(policy.last_state());
        cum_matched += report.n_matched;
        Transition t;
        t.s = current;
        t.a_m = policy.last_goals();
        t.a_w = policy.last_scores();
        t.r_ex = extrinsic_reward(report, cum_matched, report.clock, weights, scfg.t_max);
        const auto& decision = engine.last_decision();
        t.r_in = hierarchy ? intrinsic_reward(decision.goals, decision.assignment, weights) : 0.0;
        t.done = engine.done();
        if (t.done) {
          t.s_next = std::make_shared<const GlobalState>(
              encode_state(engine.state(), params.caps, norm, nullptr, &scfg.energy));
          current.reset();
        } else {
          const auto& mask = engine.prepare();
          t.s_next = std::make_shared<const GlobalState>(
              encode_state(engine.state(), params.caps, norm, &mask, &scfg.energy));
          current = t.s_next;
        }
        buffer.push(std::move(t));
        ++steps;

        if (buffer.size() >= min_fill && steps % cfg.update_every == 0) {
          const auto batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size), sample_rng);
          const auto losses = critic_update(params, *batch, weights, opt, cfg.reward_scale);
          const auto grads = actor_update(params, *batch, opt, cfg.preact_decay);
          soft_update(params, cfg.tau);
          sum_lm += losses.loss_m;
          sum_lw += losses.loss_w;
          sum_gm += grads.grad_m;
          sum_gw += grads.grad_w;
          ++n_updates;
          ++result.updates;
        }
      }

      const auto metrics = engine.metrics();
      EpisodeCurve c;
      c.episode = ep;
      c.pn = metrics.pn;
      c.dn = metrics.dn;
      if (n_updates > 0) {
        c.loss_m = sum_lm / n_updates;
        c.loss_w = sum_lw / n_updates;
        c.grad_m = sum_gm / n_updates;
        c.grad_w = sum_gw / n_updates;
      }
      c.epsilon = noise;
      if (outputs.curves) *outputs.curves << curve_json(c) << '\n' << std::flush;
      result.curves.push_back(c);
      if (cfg.checkpoint_every > 0 && (ep + 1) % cfg.checkpoint_every == 0 &&
          !outputs.checkpoint_path.empty()) {
        save(outputs.checkpoint_path + ".ep" + std::to_string(ep + 1));
      }
    }
  } catch (const TrainingFault&) {
    save(outputs.checkpoint_path.empty() ? std::string() : outputs.checkpoint_path + ".fault");
    throw;
  }
  save(outputs.checkpoint_path);
  return result;
}

}  // namespace airground
