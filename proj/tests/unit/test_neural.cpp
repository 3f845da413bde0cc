#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "airground/errors.hpp"
#include "airground/neural.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace airground;
using namespace airground::nn;
using namespace airground::testing;

namespace {

NetConfig small_net(bool hierarchy = true) {
  NetConfig c;
  c.hidden = 8;
  c.heads = 2;
  c.hierarchy = hierarchy;
  return c;
}

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST(Neural, NetConfigValidation) {
  EXPECT_NO_THROW(small_net().validate());
  NetConfig c = small_net();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_net();
  c.hidden = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Neural, LinearAndLayerNormGradients) {
  Rng rng(1);
  Linear lin("l", 5, 3);
  lin.init(rng);
  LayerNorm ln("n", 3);
  ln.gamma.value = random_tensor(rng, 1, 3);
  ln.beta.value = random_tensor(rng, 1, 3);
  const Tensor2 x = random_tensor(rng, 4, 5);
  const Tensor2 wy = random_tensor(rng, 4, 3);
  auto loss = [&](const Tensor2& in) { return (ln.forward(lin.forward(in)).array() * wy.array()).sum(); };
  LayerNorm::Cache c;
  const Tensor2 y = lin.forward(x);
  ln.forward(y, &c);
  const Tensor2 dx = lin.backward(x, ln.backward(c, wy));
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Tensor2 xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    EXPECT_TRUE(close((loss(xp) - loss(xm)) / (2 * h), dx.data()[i], 1e-6));
  }
  for (Param* p : {&lin.w, &lin.b, &ln.gamma, &ln.beta}) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double s = p->value.data()[i];
      p->value.data()[i] = s + h;
      const double up = loss(x);
      p->value.data()[i] = s - h;
      const double dn = loss(x);
      p->value.data()[i] = s;
      EXPECT_TRUE(close((up - dn) / (2 * h), p->grad.data()[i], 1e-6)) << p->name;
    }
  }
}

TEST(Neural, ActorGradientsMatchFiniteDifferences) {
  Rng rng(12);
  const Caps caps{5, 3, 2};
  for (int trial = 0; trial < 6; ++trial) {
    Actor actor(small_net(trial % 3 != 2));
    actor.init(rng);
    const auto gs = random_global_state(rng, caps);
    const auto g = check_actor_gradients(actor, gs, rng, 6, 1e-4);
    EXPECT_EQ(g.bad, 0) << "trial " << trial << ": " << g.first_bad;
  }
}

TEST(Neural, PreactivationDecayGradients) {
  Rng rng(13);
  const Caps caps{5, 3, 2};
  for (int trial = 0; trial < 3; ++trial) {
    Actor actor(small_net(trial != 2));
    actor.init(rng);
    const auto gs = random_global_state(rng, caps);
    const auto g = check_actor_gradients(actor, gs, rng, 6, 1e-4, 0.7);
    EXPECT_EQ(g.bad, 0) << "trial " << trial << ": " << g.first_bad;
  }
}

TEST(Neural, CriticGradientsMatchFiniteDifferences) {
  Rng rng(3);
  Critic critic("c", 7, 8);
  critic.init(rng);
  const Tensor2 x = random_tensor(rng, 5, 7);
  Eigen::VectorXd wq(5);
  for (int i = 0; i < 5; ++i) wq(i) = rng.uniform(-1, 1);
  auto loss = [&](const Tensor2& in) { return critic.forward(in).dot(wq); };
  Critic::Cache cache;
  critic.forward(x, &cache);
  ParamRefs params;
  critic.collect(params);
  zero_grads(params);
  const Tensor2 dx = critic.backward(cache, wq);
  const Tensor2 dx_only = critic.input_grad(cache, wq);
  EXPECT_LT((dx - dx_only).cwiseAbs().maxCoeff(), 1e-15);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Tensor2 xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    EXPECT_TRUE(close((loss(xp) - loss(xm)) / (2 * h), dx.data()[i], 1e-5));
  }
  for (Param* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double s = p->value.data()[i];
      p->value.data()[i] = s + h;
      const double up = loss(x);
      p->value.data()[i] = s - h;
      const double dn = loss(x);
      p->value.data()[i] = s;
      EXPECT_TRUE(close((up - dn) / (2 * h), p->grad.data()[i], 1e-5)) << p->name << " " << i;
    }
  }
}

TEST(Neural, BatchedActorEqualsReferenceComputation) {
  Rng rng(5);
  const Caps caps{6, 3, 3};
  for (const bool hierarchy : {true, false}) {
    Actor actor(small_net(hierarchy));
    actor.init(rng);
    for (int trial = 0; trial < 5; ++trial) {
      const auto gs = random_global_state(rng, caps);
      const auto out = actor.forward(gs);
      const auto emb = actor.enc.forward(gs);
      for (int s = 0; s < caps.n_max; ++s) {
        if (!gs.valid_order[s]) {
          EXPECT_EQ(out.goals.row(s).cwiseAbs().sum(), 0.0);
          continue;
        }
        const auto ctx = fuse_contexts(emb, s);
        std::array<double, 2> goal{0.0, 0.0};
        if (hierarchy) {
          goal = manager_forward(actor.manager, ctx.z);
          EXPECT_NEAR(out.goals(s, 0), goal[0], 1e-12);
          EXPECT_NEAR(out.goals(s, 1), goal[1], 1e-12);
          EXPECT_NEAR(goal[0] + goal[1], 1.0, 1e-12);
        } else {
          EXPECT_EQ(out.goals_in.row(s).cwiseAbs().sum(), 0.0);
        }
        for (int v = 0; v < caps.vehicles(); ++v) {
          const auto idx = gs.pair_index(s, v);
          if (!gs.pair_valid[idx]) {
            EXPECT_EQ(out.raw_scores(s, v), 0.0);
            continue;
          }
          const bool uav = v < caps.n_uav;
          const Worker& w = uav || !hierarchy ? actor.worker_uav : actor.worker_carrier;
          const RowVec row = uav ? RowVec(ctx.u_o.row(v)) : RowVec(ctx.c_o.row(v - caps.n_uav));
          const std::span<const double> pf(&gs.pair_feat[idx * kPairFeatures], kPairFeatures);
          const double ref = worker_forward(w, {row.data(), static_cast<std::size_t>(row.size())}, pf, goal);
          EXPECT_NEAR(out.raw_scores(s, v), ref, 1e-12);
        }
      }
    }
  }
}

TEST(Neural, PaddedRowsDoNotLeak) {
  Rng rng(8);
  const Caps caps{6, 4, 3};
  Actor actor(small_net());
  actor.init(rng);
  auto gs = random_global_state(rng, caps, 0.5, 0.5);
  const auto a = actor.forward(gs);
  for (int s = 0; s < caps.n_max; ++s) {
    if (gs.valid_order[s]) continue;
    for (int f = 0; f < kOrderFeatures; ++f) gs.order_seg[s * kOrderFeatures + f] = 0.77;
  }
  for (int i = 0; i < caps.n_uav; ++i) {
    if (gs.uav_ids[i] >= 0) continue;
    for (int f = 0; f < kUavFeatures; ++f) gs.uav_seg[i * kUavFeatures + f] = 0.33;
  }
  const auto b = actor.forward(gs);
  EXPECT_LT((a.goals - b.goals).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.raw_scores - b.raw_scores).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Neural, PermutationEquivariance) {
  Rng rng(31);
  const Caps caps{7, 4, 3};
  Actor actor(small_net());
  actor.init(rng);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gs = random_global_state(rng, caps);
    const auto base = actor.forward(gs);

    const auto pu = shuffled(rng, caps.n_uav);
    const auto out_u = actor.forward(permute_uavs(gs, pu));
    EXPECT_LT((out_u.goals - base.goals).cwiseAbs().maxCoeff(), 1e-9);
    for (int s = 0; s < caps.n_max; ++s)
      for (int i = 0; i < caps.n_uav; ++i) EXPECT_NEAR(out_u.raw_scores(s, i), base.raw_scores(s, pu[i]), 1e-9);

    const auto po = shuffled(rng, caps.n_max);
    const auto out_o = actor.forward(permute_orders(gs, po));
    for (int s = 0; s < caps.n_max; ++s) {
      for (int k = 0; k < 2; ++k) EXPECT_NEAR(out_o.goals(s, k), base.goals(po[s], k), 1e-9);
      for (int v = 0; v < caps.vehicles(); ++v) {
        EXPECT_NEAR(out_o.raw_scores(s, v), base.raw_scores(po[s], v), 1e-9);
      }
    }
  }
}

TEST(Neural, ScoreAllRespectsMaskAndIds) {
  Rng rng(2);
  const auto w = [] {
    auto cfg = airground::testing::tiny_config();
    auto sc = load_scenario(cfg);
    return make_world(sc, 5);
  }();
  auto world = w;
  world.clock = 6;
  const EnergyModel em;
  const auto mask = build_mask(world, em, std::size_t{8});
  const Caps caps{8, 3, 3};
  const auto gs = encode_state(world, caps, Normalizer::for_world(world, 60.0), &mask, &em);
  Actor actor(small_net());
  actor.init(rng);
  for (const double noise : {0.0, 0.3}) {
    Rng r(4);
    const auto d = score_all(actor, gs, mask, noise, r);
    ASSERT_EQ(d.scores.rows(), mask.rows());
    for (std::size_t row = 0; row < mask.rows(); ++row) {
      for (std::size_t c = 0; c < mask.cols(); ++c) {
        const double s = d.scores.at(row, c);
        if (!mask.at(row, c)) {
          EXPECT_EQ(s, kMaskedScore);
        } else {
          EXPECT_GE(s, 0.0);
          EXPECT_LE(s, 1.0);
        }
      }
      if (std::count(mask.entries.begin() + row * mask.cols(), mask.entries.begin() + (row + 1) * mask.cols(), 1)) {
        EXPECT_TRUE(d.goals.count(mask.orders[row]));
      }
    }
    if (noise == 0.0) {
      const auto out = actor.forward(gs);
      for (int s = 0; s < caps.n_max; ++s) {
        if (!gs.valid_order[s]) continue;
        const auto row = std::find(mask.orders.begin(), mask.orders.end(), gs.order_ids[s]) - mask.orders.begin();
        for (int v = 0; v < caps.vehicles(); ++v) {
          if (!gs.pair_valid[gs.pair_index(s, v)]) continue;
          const std::size_t col = static_cast<std::size_t>(v);  // ids and columns are both in fleet order
          EXPECT_NEAR(d.scores.at(row, col), (out.raw_scores(s, v) + 1.0) / 2.0, 1e-12);
        }
      }
    }
  }
}

TEST(Neural, ParamsInitDeterministicAndTargetsMatch) {
  const Caps caps{4, 2, 2};
  PolicyParams a(small_net(), caps, 9), b(small_net(), caps, 9), c(small_net(), caps, 10);
  EXPECT_EQ(param_hash(a.all()), param_hash(b.all()));
  EXPECT_NE(param_hash(a.online()), param_hash(c.online()));
  EXPECT_EQ(param_hash(a.online()), param_hash(a.target()));
  const auto on = a.online();
  const auto tg = a.target();
  ASSERT_EQ(on.size(), tg.size());
  for (std::size_t i = 0; i < on.size(); ++i) {
    EXPECT_EQ(on[i]->value.rows(), tg[i]->value.rows());
    EXPECT_EQ(on[i]->value.cols(), tg[i]->value.cols());
  }
}

TEST(Neural, CheckpointRoundTripAndLayout) {
  const Caps caps{4, 2, 2};
  PolicyParams a(small_net(), caps, 1), b(small_net(), caps, 2);
  const auto dir = airground::testing::temp_dir("ckpt");
  const auto path = (dir / "model.bin").string();
  save_checkpoint(a, path);
  const auto bytes = airground::testing::read_file(path);
  EXPECT_EQ(bytes, checkpoint_bytes(a));
  EXPECT_EQ(bytes.substr(0, 8), "HRL4AG01");
  std::size_t expect = 12;
  for (const Param* p : a.all()) expect += 8 + 4 * static_cast<std::size_t>(p->value.size());
  EXPECT_EQ(bytes.size(), expect);

  load_checkpoint(b, path);
  // Values pass through float32 on disk.
  const auto pa = a.all(), pb = b.all();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_LT((pa[i]->value - pb[i]->value).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_EQ(checkpoint_bytes(a), checkpoint_bytes(b));

  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir / "bad.bin", std::ios::binary) << bad;
  EXPECT_THROW(load_checkpoint(b, (dir / "bad.bin").string()), InputError);
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  EXPECT_THROW(load_checkpoint(b, (dir / "short.bin").string()), InputError);
  std::ofstream(dir / "long.bin", std::ios::binary) << bytes << "x";
  EXPECT_THROW(load_checkpoint(b, (dir / "long.bin").string()), InputError);
  PolicyParams wide(NetConfig{.hidden = 16, .heads = 2}, caps, 1);
  EXPECT_THROW(load_checkpoint(wide, path), InputError);
  EXPECT_THROW(load_checkpoint(b, (dir / "missing.bin").string()), FileError);

  PolicyParams c(small_net(), caps, 3);
  const auto before = checkpoint_bytes(c);
  EXPECT_THROW(load_checkpoint(c, (dir / "short.bin").string()), InputError);
  EXPECT_THROW(load_checkpoint(c, (dir / "long.bin").string()), InputError);
  EXPECT_EQ(checkpoint_bytes(c), before);
}

TEST(Neural, CriticFeatureLayout) {
  Rng rng(6);
  const Caps caps{3, 2, 1};
  const auto cfg = small_net();
  const auto gs = random_global_state(rng, caps);
  EXPECT_EQ(state_feature_dim(caps), 3 * 7 + 2 * 5 + 1 * 4 + 8);
  EXPECT_EQ(worker_action_dim(caps, cfg), 3 * 3 * 6);
  std::vector<double> sf(state_feature_dim(caps));
  write_state_features(gs, sf);
  EXPECT_EQ(sf[6], gs.valid_order[0] ? 1.0 : 0.0);
  Tensor2 shifted = Tensor2::Constant(3, 3, 0.25);
  std::vector<double> wa(worker_action_dim(caps, cfg));
  write_worker_action(gs, cfg, shifted, wa);
  for (int s = 0; s < 3; ++s) {
    for (int v = 0; v < 3; ++v) {
      const auto idx = gs.pair_index(s, v);
      const double* p = &wa[idx * 6];
      if (gs.pair_valid[idx]) {
        EXPECT_EQ(p[0], 0.25);
        EXPECT_EQ(p[1], 1.0);
        EXPECT_EQ(p[2], gs.pair_feat[idx * kPairFeatures]);
      } else {
        for (int k = 0; k < 6; ++k) EXPECT_EQ(p[k], 0.0);
      }
    }
  }
}
