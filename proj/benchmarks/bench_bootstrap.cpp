#include "seqbreak/bootstrap.hpp"
#include "seqbreak/experiment.hpp"

#include <benchmark/benchmark.h>

using namespace seqbreak;

namespace {

SimulatedData data(std::size_t m, std::size_t T_m) {
  Scenario s;
  s.beta0 = default_beta0("growth");
  s.m = m;
  s.T_m = T_m;
  s.seed = 23;
  return simulate_stream(s, 0);
}

} // namespace

static void BM_BlockStatisticSample(benchmark::State& state) {
  const std::size_t m = 100;
  const auto T_m = static_cast<std::size_t>(state.range(0));
  const auto d = data(m, T_m);
  const ModelSpec model = growth_model();
  const HistoricalFit hist = fit_nls(d.history, model);
  const BlockStatistic stat = make_block_statistic(d.history, model, hist, hist, T_m, 0.25);
  Rng rng = substream(1, StreamTag::test, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stat.sample(rng));
  }
}
BENCHMARK(BM_BlockStatisticSample)->Arg(100)->Arg(1000);

static void BM_Schedule(benchmark::State& state) {
  const auto d = data(50, 50);
  std::vector<Observation> all = d.history;
  all.insert(all.end(), d.stream.begin(), d.stream.end());
  BootstrapConfig cfg;
  cfg.L = static_cast<std::size_t>(state.range(0));
  cfg.M_boot = 500;
  cfg.T_m = 50;
  cfg.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(critical_value_schedule(all, 50, growth_model(), cfg));
  }
}
BENCHMARK(BM_Schedule)->Arg(5)->Arg(25)->Unit(benchmark::kMillisecond);
