#include "seqbreak/asymptotic.hpp"
#include "seqbreak/errors.hpp"

#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

using namespace seqbreak;
using Catch::Approx;

TEST_CASE("quantile examples", "[asymptotic]") {
  CHECK(quantile(std::vector<double>{1, 2, 3, 4, 5}, 0.2) == 4.0);
  CHECK(quantile(std::vector<double>{7}, 0.3) == 7.0);
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  CHECK(quantile(hundred, 0.05) == 95.0);
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.05), EmptySample);
  CHECK_THROWS_AS(quantile(hundred, 1.0), DomainError);
}

TEST_CASE("quantile agrees with a full-sort oracle", "[asymptotic]") {
  std::mt19937_64 gen(2);
  std::exponential_distribution<double> d(1.0);
  for (std::size_t n : {1u, 2u, 7u, 100u, 1001u}) {
    std::vector<double> v(n);
    for (auto& x : v) {
      x = d(gen);
    }
    for (double a : {0.01, 0.05, 0.1, 0.5, 0.9}) {
      CHECK(quantile(v, a) == oracle::upper_quantile(v, a));
    }
  }
}

TEST_CASE("limit horizon end points", "[asymptotic]") {
  CHECK(limit_upper_time(1.0, OpenEndLimit{}) == 1.0);
  CHECK(limit_upper_time(0.5, OpenEndLimit{}) == Approx(4.0).epsilon(1e-15));
  CHECK(limit_upper_time(1.0, ClosedEndLimit{2.0}) == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(limit_upper_time(0.0, OpenEndLimit{}), DomainError);
  CHECK_THROWS_AS(limit_upper_time(1.0, ClosedEndLimit{0.0}), DomainError);
  const auto grid = WienerGrid::for_horizon(1.0, OpenEndLimit{}, 4);
  CHECK(grid.point(0) == 0.25);
  CHECK(grid.point(3) == 1.0);
  CHECK(grid.spacing() == 0.25);
}

TEST_CASE("single-point grid draws |N(0,1)|", "[asymptotic]") {
  const WienerGrid grid{1, 1.0};
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto a = substream(3, StreamTag::test, i);
    auto b = substream(3, StreamTag::test, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    CHECK(sample_V(0.0, 1.0, OpenEndLimit{}, grid, a) == std::abs(normal(b)));
  }
}

TEST_CASE("a draw dominates the weighted end point", "[asymptotic]") {
  const auto grid = WienerGrid::for_horizon(0.8, ClosedEndLimit{3.0}, 512);
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto a = substream(4, StreamTag::test, i);
    auto b = substream(4, StreamTag::test, i);
    const double v = sample_V(0.3, 0.8, ClosedEndLimit{3.0}, grid, a);
    const auto path = simulate_wiener(grid, b);
    const double t = path.times.back();
    const double w = (1.0 + t - 0.64 * t) / std::pow(t, 0.3);
    CHECK(v >= w * std::abs(path.values.back()));
    CHECK(v == weighted_sup(path, 0.3, 0.8, t));
  }
}

TEST_CASE("sample_V rejects bad inputs", "[asymptotic]") {
  auto rng = substream(1, StreamTag::test, 0);
  const WienerGrid grid{16, 1.0};
  CHECK_THROWS_AS(sample_V(0.1, -1.0, OpenEndLimit{}, grid, rng), DomainError);
  CHECK_THROWS_AS(sample_V(0.6, 1.0, OpenEndLimit{}, grid, rng), DomainError);
  CHECK_THROWS_AS(sample_V(0.1, 2.0, OpenEndLimit{}, grid, rng), DomainError);
  CHECK_THROWS_AS(critical_value(0.0, 0.05, 1.0, OpenEndLimit{}, 999, 64, 1), DomainError);
  CHECK_THROWS_AS(critical_value(0.0, 1.0, 1.0, OpenEndLimit{}, 1000, 64, 1), DomainError);
}

TEST_CASE("sup |W| on [0,1] has its 95% point near 2.24", "[asymptotic]") {
  const auto draws = simulate_V_sample(0.0, 1.0, OpenEndLimit{}, 20000, 4096, 8);
  const double below =
      static_cast<double>(std::count_if(draws.begin(), draws.end(), [](double v) { return v <= 2.2411; })) /
      static_cast<double>(draws.size());
  // Three binomial standard errors plus a small allowance for the discrete grid.
  CHECK(std::abs(below - 0.95) <= 3.0 * std::sqrt(0.95 * 0.05 / 20000.0) + 0.003);
}

TEST_CASE("critical values decrease in alpha on a shared sample", "[asymptotic][property]") {
  for (double gamma : {0.0, 0.25, 0.45}) {
    const auto draws = simulate_V_sample(gamma, 1.0, OpenEndLimit{}, 5000, 1024, 9);
    double prev = std::numeric_limits<double>::infinity();
    for (double a : {0.01, 0.025, 0.05, 0.10, 0.25}) {
      const double c = quantile(draws, a);
      CHECK(c <= prev);
      prev = c;
    }
  }
}

TEST_CASE("bridge refinement never lowers the discrete sup", "[asymptotic][property]") {
  for (std::uint64_t i = 0; i < 30; ++i) {
    auto rng = substream(10, StreamTag::test, i);
    auto path = simulate_wiener(WienerGrid{64, 1.0}, rng);
    double prev = weighted_sup(path, 0.2, 1.0, 1.0);
    for (int level = 0; level < 5; ++level) {
      auto bridge = substream(10, StreamTag::bridge, i, static_cast<std::uint64_t>(level));
      path = refine_by_bridge(path, bridge);
      const double v = weighted_sup(path, 0.2, 1.0, 1.0);
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(path.times.size() == 64u * 32u);
  }
}

TEST_CASE("bridge midpoints have the right spread", "[asymptotic]") {
  // Midpoint minus chord over a unit step is N(0, 1/4).
  double ss = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto rng = substream(11, StreamTag::test, static_cast<std::uint64_t>(i));
    WienerPath p{{1.0}, {0.0}};
    const auto fine = refine_by_bridge(p, rng);
    ss += fine.values[0] * fine.values[0];
  }
  CHECK(ss / n == Approx(0.25).margin(3.0 * 0.25 * std::sqrt(2.0 / n)));
}

TEST_CASE("closed-end quantiles are dominated by open-end ones", "[asymptotic][property]") {
  const double D = 0.9, T = 1.5, gamma = 0.25;
  const auto grid = WienerGrid::for_horizon(D, OpenEndLimit{}, 2048);
  const double t_closed = limit_upper_time(D, ClosedEndLimit{T});
  std::vector<double> open, closed;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    auto rng = substream(12, StreamTag::test, i);
    const auto path = simulate_wiener(grid, rng);
    open.push_back(weighted_sup(path, gamma, D, grid.t_upper));
    closed.push_back(weighted_sup(path, gamma, D, t_closed));
  }
  for (double a : {0.01, 0.05, 0.1}) {
    CHECK(quantile(closed, a) <= quantile(open, a));
  }
}

TEST_CASE("calibration is reproducible and schedule independent", "[asymptotic][property]") {
  const auto a = critical_value(0.3, 0.05, 0.8, ClosedEndLimit{2.0}, 2000, 256, 42, 1);
  const auto b = critical_value(0.3, 0.05, 0.8, ClosedEndLimit{2.0}, 2000, 256, 42, 1);
  const auto c = critical_value(0.3, 0.05, 0.8, ClosedEndLimit{2.0}, 2000, 256, 42, 3);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a.c_alpha > 0.0);
  CHECK(a.standard_error > 0.0);
  CHECK(a.standard_error < 0.2);
  const auto d = critical_value(0.3, 0.05, 0.8, ClosedEndLimit{2.0}, 2000, 256, 43, 1);
  CHECK(d.c_alpha != a.c_alpha);

  const auto draws = simulate_V_sample(0.3, 0.8, ClosedEndLimit{2.0}, 2000, 256, 42);
  const auto grid = WienerGrid::for_horizon(0.8, ClosedEndLimit{2.0}, 256);
  for (std::size_t r : {0u, 17u, 1999u}) {
    auto rng = substream(42, StreamTag::wiener_path, r);
    CHECK(sample_V(0.3, 0.8, ClosedEndLimit{2.0}, grid, rng) == draws[r]);
  }
}
