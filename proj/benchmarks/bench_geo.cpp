#include <benchmark/benchmark.h>

#include "airground/geo.hpp"
#include "airground/scenario.hpp"

using namespace airground;

namespace {

GridNetworkSpec grid(int side) { return {side, side, 1.0, 1.3, 5}; }

// Fresh network per query: a full Dijkstra tree is built every time.
void BM_ShortestPathCold(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto proto = generate_grid_network(grid(side));
  const auto& ids = proto.node_ids();
  for (auto _ : state) {
    state.PauseTiming();
    RoadNetwork net(generate_grid_network(grid(side)));
    state.ResumeTiming();
    benchmark::DoNotOptimize(net.distance(ids.front(), ids.back()));
  }
  state.SetLabel(std::to_string(ids.size()) + " nodes");
}
BENCHMARK(BM_ShortestPathCold)->Arg(5)->Arg(10)->Arg(20)->Arg(40);

void BM_ShortestPathMemoized(benchmark::State& state) {
  const auto net = generate_grid_network(grid(static_cast<int>(state.range(0))));
  const auto& ids = net.node_ids();
  net.distance(ids.front(), ids.back());
  for (auto _ : state) benchmark::DoNotOptimize(net.distance(ids.front(), ids.back()));
}
BENCHMARK(BM_ShortestPathMemoized)->Arg(10)->Arg(40);

void BM_ShortestPathRoute(benchmark::State& state) {
  const auto net = generate_grid_network(grid(static_cast<int>(state.range(0))));
  const auto& ids = net.node_ids();
  net.distance(ids.front(), ids.back());
  for (auto _ : state) benchmark::DoNotOptimize(net.path(ids.front(), ids.back()));
}
BENCHMARK(BM_ShortestPathRoute)->Arg(10)->Arg(40);

}  // namespace
