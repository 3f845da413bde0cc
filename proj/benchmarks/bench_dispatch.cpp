#include <benchmark/benchmark.h>

#include "airground/assignment.hpp"
#include "airground/feasibility.hpp"
#include "fixtures.hpp"

using namespace airground;

namespace {

void BM_BuildMask(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto world = bench::dispatch_world(6, n, n);
  const EnergyModel em;
  build_mask(world, em, static_cast<std::size_t>(n));  // warm the path memo
  for (auto _ : state) benchmark::DoNotOptimize(build_mask(world, em, static_cast<std::size_t>(n)));
}
BENCHMARK(BM_BuildMask)->Arg(10)->Arg(25)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_GreedyMatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  const auto mask = bench::random_mask(rng, n, n, 0.5);
  auto scores = ScoreMatrix::masked_like(mask);
  for (std::size_t r = 0; r < mask.rows(); ++r)
    for (std::size_t c = 0; c < mask.cols(); ++c)
      if (mask.at(r, c)) scores.at(r, c) = rng.uniform(0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_match(scores, mask));
}
BENCHMARK(BM_GreedyMatch)->Arg(10)->Arg(25)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_ExactMatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(4);
  const auto mask = bench::random_mask(rng, n, n, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(exact_match(mask));
}
BENCHMARK(BM_ExactMatch)->Arg(10)->Arg(25)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_ExactBranchAndBound(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(5);
  const auto mask = bench::random_mask(rng, n, n, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(exact_match_branch_and_bound(mask));
}
BENCHMARK(BM_ExactBranchAndBound)->Arg(6)->Arg(9)->Arg(12)->Unit(benchmark::kMicrosecond);

}  // namespace
