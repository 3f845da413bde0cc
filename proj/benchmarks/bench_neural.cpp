#include <benchmark/benchmark.h>

#include "airground/policy.hpp"
#include "airground/trainer.hpp"
#include "fixtures.hpp"

using namespace airground;

namespace {

// Phase 2 at 50 orders x 50 vehicles: mask, encoding, actor scoring and
// greedy matching.
void BM_Phase2(benchmark::State& state) {
  const auto world = bench::dispatch_world(6, 50, 50);
  const EnergyModel em;
  nn::NetConfig net;
  net.hidden = static_cast<int>(state.range(0));
  net.heads = 4;
  const Caps caps{50, 25, 25};
  const nn::PolicyParams params(net, caps, 1);
  HierarchicalPolicy policy(params.actor, caps, 60.0, em);
  policy.begin_episode(1);
  for (auto _ : state) {
    const auto mask = build_mask(world, em, std::size_t{50});
    benchmark::DoNotOptimize(policy.decide(world, mask));
  }
}
BENCHMARK(BM_Phase2)->Arg(16)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ActorForward(benchmark::State& state) {
  const auto world = bench::dispatch_world(6, 50, 50);
  const EnergyModel em;
  nn::NetConfig net;
  net.hidden = static_cast<int>(state.range(0));
  net.heads = 4;
  const Caps caps{50, 25, 25};
  const nn::PolicyParams params(net, caps, 1);
  const auto mask = build_mask(world, em, std::size_t{50});
  const auto gs = encode_state(world, caps, Normalizer::for_world(world, 60.0), &mask, &em);
  for (auto _ : state) benchmark::DoNotOptimize(params.actor.forward(gs));
}
BENCHMARK(BM_ActorForward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

// One critic + actor update on a batch of 32 from short greedy-free rollouts.
void BM_TrainUpdate(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.network.grid = {4, 5, 2.0, 1.3, 7};
  const auto scenario = std::make_shared<const Scenario>(load_scenario(cfg));
  nn::NetConfig net;
  net.hidden = static_cast<int>(state.range(0));
  net.heads = 2;
  nn::PolicyParams params(net, caps_for(cfg), 1);
  HierarchicalPolicy policy(params.actor, params.caps, cfg.max_speed_kmh(), cfg.energy);
  policy.set_noise(0.3);
  std::vector<Transition> items;
  Engine engine(scenario, {.measure_time = false});
  engine.reset(1);
  policy.begin_episode(1);
  const auto norm = Normalizer::for_world(engine.state(), cfg.max_speed_kmh());
  while (!engine.done() && items.size() < 32) {
    engine.prepare();
    const auto report = engine.step(policy);
    Transition t;
    t.s = std::make_shared<const GlobalState>(policy.last_state());
    t.a_m = policy.last_goals();
    t.a_w = policy.last_scores();
    t.r_ex = report.n_delivered;
    t.s_next = std::make_shared<const GlobalState>(
        encode_state(engine.state(), params.caps, norm, nullptr, &cfg.energy));
    items.push_back(std::move(t));
  }
  std::vector<const Transition*> batch;
  for (const auto& t : items) batch.push_back(&t);
  TrainConfig tc;
  tc.optimizer = OptimizerKind::Adam;
  tc.lr_actor = tc.lr_critic = 1e-4;
  Optimizers opt(tc);
  const RewardWeights w;
  for (auto _ : state) {
    critic_update(params, batch, w, opt);
    actor_update(params, batch, opt);
    soft_update(params, tc.tau);
  }
}
BENCHMARK(BM_TrainUpdate)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
