#include "seqbreak/asymptotic.hpp"

#include <benchmark/benchmark.h>

using namespace seqbreak;

static void BM_SampleV(benchmark::State& state) {
  const auto n_grid = static_cast<std::size_t>(state.range(0));
  const WienerGrid grid = WienerGrid::for_horizon(1.0, OpenEndLimit{}, n_grid);
  Rng rng = substream(1, StreamTag::test, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_V(0.25, 1.0, OpenEndLimit{}, grid, rng));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n_grid));
}
BENCHMARK(BM_SampleV)->Arg(1024)->Arg(8192);

static void BM_CriticalValue(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(critical_value(0.0, 0.05, 1.0, OpenEndLimit{}, 2000, 1024, 3));
  }
}
BENCHMARK(BM_CriticalValue)->Unit(benchmark::kMillisecond);
