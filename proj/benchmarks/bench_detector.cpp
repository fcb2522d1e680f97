#include "seqbreak/detector.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace seqbreak;

static void BM_DetectorStep(benchmark::State& state) {
  MonitorConfig cfg;
  cfg.gamma = 0.25;
  cfg.scheme = AsymptoticScheme{1e300};
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  std::vector<double> residuals(4096);
  for (auto& r : residuals) {
    r = normal(gen);
  }
  DetectorState s;
  std::size_t i = 0;
  for (auto _ : state) {
    s = step(s, residuals[i++ & 4095], 100, 1.0, cfg);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_DetectorStep);

static void BM_ZStatistic(benchmark::State& state) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal;
  std::vector<double> record(static_cast<std::size_t>(state.range(0)));
  for (auto& r : record) {
    r = normal(gen);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(z_statistic(record, 100, 1.0, 0.25));
  }
}
BENCHMARK(BM_ZStatistic)->Arg(200)->Arg(10000);
