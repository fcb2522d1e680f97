#include "seqbreak/experiment.hpp"
#include "seqbreak/nls.hpp"

#include <benchmark/benchmark.h>

using namespace seqbreak;

namespace {

std::vector<Observation> history(const std::string& model, std::size_t m) {
  Scenario s;
  s.model = model;
  s.beta0 = default_beta0(model);
  s.m = m;
  s.T_m = 1;
  s.seed = 17;
  return simulate_stream(s, 0).history;
}

} // namespace

static void BM_FitGrowth(benchmark::State& state) {
  const auto data = history("growth", static_cast<std::size_t>(state.range(0)));
  const ModelSpec model = growth_model();
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_nls(data, model));
  }
}
BENCHMARK(BM_FitGrowth)->Arg(25)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

static void BM_FitCompartmental(benchmark::State& state) {
  const auto data = history("compartmental", static_cast<std::size_t>(state.range(0)));
  const ModelSpec model = compartmental_model();
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(fit_nls(data, model));
    } catch (const std::exception&) {
    }
  }
}
BENCHMARK(BM_FitCompartmental)->Arg(100)->Unit(benchmark::kMicrosecond);

static void BM_GaussianMoments(benchmark::State& state) {
  const ModelSpec model = compartmental_model();
  const Vector beta = default_beta0("compartmental");
  for (auto _ : state) {
    benchmark::DoNotOptimize(gaussian_moments(model, {1.0}, beta));
  }
}
BENCHMARK(BM_GaussianMoments)->Unit(benchmark::kMicrosecond);
