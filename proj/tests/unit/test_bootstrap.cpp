#include "seqbreak/asymptotic.hpp"
#include "seqbreak/bootstrap.hpp"
#include "seqbreak/detector.hpp"
#include "seqbreak/errors.hpp"

#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace seqbreak;
using Catch::Approx;

namespace {

Matrix random_grads(Eigen::Index q, Eigen::Index n, std::uint64_t seed, bool intercept = false) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix g(q, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < q; ++i) {
      g(i, j) = (intercept && i == 0) ? 1.0 : d(gen);
    }
  }
  return g;
}

std::vector<double> random_errors(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> e(n);
  for (auto& v : e) {
    v = d(gen);
  }
  return e;
}

Matrix gram(const Matrix& grads, std::size_t m) {
  const Matrix h = grads.leftCols(static_cast<Eigen::Index>(m));
  return h * h.transpose() / static_cast<double>(m);
}

double mean_norm2(const Matrix& grads, std::size_t m) {
  return (grads.leftCols(static_cast<Eigen::Index>(m)).rowwise().mean()).squaredNorm();
}

std::vector<Observation> growth_data(std::size_t n, std::uint64_t seed) {
  const auto model = growth_model();
  Vector beta(2);
  beta << 0.5, 1.0;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> x(0.0, 1.0), e(0.0, std::sqrt(0.5));
  std::vector<Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.x = {x(gen)};
    o.y = model.value(o.x, beta) + e(gen);
    out.push_back(o);
  }
  return out;
}

} // namespace

TEST_CASE("c1 regimes for constant gradients", "[bootstrap]") {
  const std::size_t m = 5, k = 3;
  Vector v(2);
  v << 0.4, -1.1;
  Matrix grads = v.replicate(1, static_cast<Eigen::Index>(m + k));
  Matrix B(2, 2);
  B << 2.0, 0.3, 0.3, 1.0;
  const double D_A = 0.7;
  for (std::size_t l = 1; l <= 20; ++l) {
    const Vector expect = B * (static_cast<double>(l) * v) / D_A;
    CHECK((c1_vector(m, k, l, grads, B, D_A) - expect).norm() <= 1e-12 * expect.norm());
  }
  CHECK_THROWS_AS(c1_vector(m, k, 0, grads, B, D_A), DomainError);
}

TEST_CASE("c1 middle regime indexes the trailing window", "[bootstrap]") {
  Matrix grads(1, 3);
  grads << 1.0, 10.0, 100.0;
  Matrix B(1, 1);
  B << 2.0;
  const Vector c1 = c1_vector(2, 1, 2, grads, B, 4.0);
  CHECK(c1[0] == Approx(2.0 * 110.0 / 4.0).epsilon(1e-15));
}

TEST_CASE("gamma tilde examples", "[bootstrap]") {
  const std::size_t m = 6, k = 2, l = 4;
  const Matrix grads = random_grads(2, static_cast<Eigen::Index>(m + k), 1);
  const Matrix B = gram(grads, m);
  const double D_A = mean_norm2(grads, m);
  const std::vector<double> zeros(m + l, 0.0);
  CHECK(gamma_tilde(m, k, l, 0.2, zeros, grads, B, D_A) == 0.0);

  const auto e = random_errors(m + l, 2);
  auto scaled = e;
  for (auto& v : scaled) {
    v *= -3.5;
  }
  CHECK(gamma_tilde(m, k, l, 0.2, scaled, grads, B, D_A) ==
        Approx(-3.5 * gamma_tilde(m, k, l, 0.2, e, grads, B, D_A)).epsilon(1e-12));

  const Matrix flat = Matrix::Zero(2, static_cast<Eigen::Index>(m + k));
  double sum = 0.0;
  for (std::size_t i = m; i < m + l; ++i) {
    sum += e[i];
  }
  CHECK(gamma_tilde(m, k, l, 0.2, e, flat, Matrix::Identity(2, 2), 1.0) ==
        Approx(sum / boundary_g(m, l, 0.2)).epsilon(1e-14));
}

TEST_CASE("gamma tilde is linear in the errors", "[bootstrap][property]") {
  const std::size_t m = 9, k = 4;
  const Matrix grads = random_grads(2, static_cast<Eigen::Index>(m + k), 3);
  const Matrix B = gram(grads, m);
  const double D_A = mean_norm2(grads, m);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t l = 1 + static_cast<std::size_t>(t % 20);
    const auto e = random_errors(m + l, 10 + t);
    const auto f = random_errors(m + l, 500 + t);
    const double a = coef(gen), b = coef(gen);
    std::vector<double> mix(m + l);
    for (std::size_t i = 0; i < mix.size(); ++i) {
      mix[i] = a * e[i] + b * f[i];
    }
    const double lhs = gamma_tilde(m, k, l, 0.3, mix, grads, B, D_A);
    const double rhs = a * gamma_tilde(m, k, l, 0.3, e, grads, B, D_A) +
                       b * gamma_tilde(m, k, l, 0.3, f, grads, B, D_A);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("bootstrap error resampling", "[bootstrap]") {
  auto rng = substream(1, StreamTag::test, 0);
  const std::vector<double> same(4, 2.5);
  for (double v : bootstrap_errors(same, 50, rng)) {
    CHECK(v == 2.5);
  }
  CHECK(bootstrap_errors(same, 0, rng).empty());

  const std::vector<double> pool = {1.0, 2.0, 3.0};
  const auto draws = bootstrap_errors(pool, 100000, rng);
  for (double value : pool) {
    const double freq = static_cast<double>(std::count(draws.begin(), draws.end(), value)) / 1e5;
    CHECK(std::abs(freq - 1.0 / 3.0) <= 0.005);
  }
}

TEST_CASE("bootstrap variance estimator", "[bootstrap]") {
  const std::size_t m = 8, q = 2;
  const Matrix grads = random_grads(2, static_cast<Eigen::Index>(m), 5);
  const Matrix B = gram(grads, m);
  CHECK_THROWS_AS(sigma_star(m, q, std::vector<double>(m, 0.0), grads, B), DegenerateBootstrap);

  const auto e = random_errors(m, 6);
  double ss = 0.0;
  for (double v : e) {
    ss += v * v;
  }
  CHECK(sigma_star(m, q, e, Matrix::Zero(2, static_cast<Eigen::Index>(m)), Matrix::Identity(2, 2)) ==
        Approx(ss / (m - q)).epsilon(1e-14));

  auto scaled = e;
  for (auto& v : scaled) {
    v *= 4.0;
  }
  CHECK(sigma_star(m, q, scaled, grads, B) == Approx(16.0 * sigma_star(m, q, e, grads, B)).epsilon(1e-12));
}

TEST_CASE("block statistic matches direct evaluation", "[bootstrap][property]") {
  const std::size_t m = 7;
  for (std::size_t k : {0u, 2u, 5u, 12u}) {
    for (std::size_t T_m : {1u, 4u, 30u}) {
      const Matrix grads = random_grads(2, static_cast<Eigen::Index>(m + k), 20 + k, true);
      const Matrix B = gram(grads, m);
      const double D_A = mean_norm2(grads, m);
      const BlockStatistic stat(m, k, T_m, 0.35, {0.1, -0.2, 0.3}, grads, B, D_A);
      for (std::uint64_t s = 0; s < 10; ++s) {
        const auto e = random_errors(m + T_m, 1000 + s);
        const double direct = oracle::block_statistic(m, k, T_m, 0.35, e, grads, B, D_A);
        CHECK(stat.evaluate(e) == Approx(direct).epsilon(1e-10));

        double sup = 0.0;
        for (std::size_t l = 1; l <= T_m; ++l) {
          sup = std::max(sup, std::abs(gamma_tilde(m, k, l, 0.35, e, grads, B, D_A)));
        }
        CHECK(stat.evaluate(e) ==
              Approx(sup / std::sqrt(sigma_star(m, 2, e, grads, B))).epsilon(1e-10));
      }
      if (T_m == 1) {
        const auto e = random_errors(m + 1, 77);
        CHECK(stat.evaluate(e) ==
              Approx(std::abs(gamma_tilde(m, k, 1, 0.35, e, grads, B, D_A)) /
                     std::sqrt(sigma_star(m, 2, e, grads, B)))
                  .epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("block statistic is scale invariant", "[bootstrap][property]") {
  const std::size_t m = 10, k = 3, T_m = 25;
  const Matrix grads = random_grads(2, static_cast<Eigen::Index>(m + k), 30);
  const BlockStatistic stat(m, k, T_m, 0.2, {1.0, 2.0}, grads, gram(grads, m), mean_norm2(grads, m));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto e = random_errors(m + T_m, 40 + s);
    for (double c : {0.01, 7.0, 1e4}) {
      auto scaled = e;
      for (auto& v : scaled) {
        v *= c;
      }
      CHECK(stat.evaluate(scaled) == Approx(stat.evaluate(e)).epsilon(1e-11));
    }
  }
}

TEST_CASE("constant residual pools are degenerate", "[bootstrap]") {
  const std::size_t m = 6, k = 0, T_m = 5;
  const Matrix grads = random_grads(2, static_cast<Eigen::Index>(m + k), 31, true);
  const BlockStatistic stat(m, k, T_m, 0.1, {0.8, 0.8, 0.8}, grads, gram(grads, m),
                            mean_norm2(grads, m));
  auto rng = substream(2, StreamTag::test, 0);
  CHECK_THROWS_AS(stat.sample(rng), DegenerateBootstrap);
}

TEST_CASE("sampled block statistic matches exhaustive enumeration", "[bootstrap][property]") {
  const std::size_t m = 3, k = 1, T_m = 2;
  const std::vector<double> pool = {-1.0, 0.25, 2.0};
  Matrix grads(1, 4);
  grads << 1.0, -2.0, 0.5, 1.5;
  Matrix B(1, 1);
  B << (1.0 + 4.0 + 0.25) / 3.0;
  const double D_A = std::pow((1.0 - 2.0 + 0.5) / 3.0, 2);
  const auto exact = oracle::enumerate_block_statistic(m, k, T_m, 0.1, pool, grads, B, D_A);
  REQUIRE(exact.size() == 243);
  const BlockStatistic stat(m, k, T_m, 0.1, pool, grads, B, D_A);
  const std::size_t M = 20000;
  std::vector<double> draws(M);
  for (std::size_t r = 0; r < M; ++r) {
    auto rng = substream(5, StreamTag::test, r);
    draws[r] = stat.sample(rng);
  }
  const double band = std::sqrt(std::log(2.0 / 0.01) / (2.0 * M));
  CHECK(oracle::ks_distance_discrete(draws, exact) <= band);
}

TEST_CASE("mixtures of point masses", "[bootstrap]") {
  const std::size_t M = 10000;
  const std::vector<std::vector<double>> single = {std::vector<double>(M, 4.0)};
  const auto W1 = mix_block_samples(single, 1, std::nullopt, 1);
  CHECK(schedule_from_mixtures(W1, 5, 12, 0.05) == std::vector<double>(12, 4.0));

  const std::vector<std::vector<double>> two = {std::vector<double>(M, 1.0),
                                                std::vector<double>(M, 3.0)};
  const auto W = mix_block_samples(two, 3, std::nullopt, 2);
  CHECK(quantile(W[0], 0.05) == 1.0);
  CHECK(quantile(W[1], 0.05) == 1.0);
  CHECK(quantile(W[2], 0.05) == 3.0);
}

TEST_CASE("mixture selection frequencies are uniform over earlier blocks", "[bootstrap][property]") {
  const std::size_t M = 20000, J = 6;
  std::vector<std::vector<double>> V(J, std::vector<double>(M, 0.0));
  std::vector<std::vector<std::size_t>> counts;
  mix_block_samples(V, J + 1, std::nullopt, 9, &counts);
  REQUIRE(counts.size() == J + 1);
  CHECK(counts[0][0] == M);
  for (std::size_t b = 1; b <= J; ++b) {
    const double p = 1.0 / static_cast<double>(b);
    const double se = std::sqrt(p * (1.0 - p) / M);
    for (std::size_t j = 0; j < J; ++j) {
      const double freq = static_cast<double>(counts[b][j]) / M;
      if (j < b) {
        CHECK(std::abs(freq - p) <= 3.0 * se + 1e-12);
      } else {
        CHECK(counts[b][j] == 0);
      }
    }
  }
}

TEST_CASE("window mixtures draw from the trailing blocks", "[bootstrap]") {
  const std::size_t M = 12000, J = 5, N = 3;
  std::vector<std::vector<double>> V(J, std::vector<double>(M, 0.0));
  std::vector<std::vector<std::size_t>> counts;
  mix_block_samples(V, J, N, 10, &counts);
  for (std::size_t b = 0; b < J; ++b) {
    std::vector<double> expect(J, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      expect[b >= i ? b - i : 0] += 1.0 / N;
    }
    for (std::size_t j = 0; j < J; ++j) {
      const double p = expect[j];
      const double freq = static_cast<double>(counts[b][j]) / M;
      CHECK(std::abs(freq - p) <= 3.0 * std::sqrt(p * (1.0 - p) / M) + 1e-12);
    }
  }
}

TEST_CASE("schedules are piecewise constant and ordered in alpha", "[bootstrap][property]") {
  std::vector<std::vector<double>> W;
  for (std::uint64_t b = 0; b < 4; ++b) {
    auto e = random_errors(3000, 60 + b);
    for (auto& v : e) {
      v = std::abs(v) * static_cast<double>(b + 1);
    }
    W.push_back(e);
  }
  const std::size_t L = 5, T_m = 17;
  const auto c05 = schedule_from_mixtures(W, L, T_m, 0.05);
  const auto c10 = schedule_from_mixtures(W, L, T_m, 0.10);
  REQUIRE(c05.size() == T_m);
  for (std::size_t k = 1; k <= T_m; ++k) {
    CHECK(c05[k - 1] > 0.0);
    CHECK(c05[k - 1] >= c10[k - 1]);
    const std::size_t b = std::min<std::size_t>(k / L, W.size() - 1);
    CHECK(c05[k - 1] == quantile(W[b], 0.05));
  }
}

TEST_CASE("critical value schedule on null growth data", "[bootstrap]") {
  const auto model = growth_model();
  BootstrapConfig cfg;
  cfg.L = 10;
  cfg.M_boot = 300;
  cfg.T_m = 40;
  cfg.gamma = 0.25;
  cfg.seed = 17;
  const std::size_t m = 25;
  CHECK(required_stream_length(cfg) == 20);
  const auto data = growth_data(m + required_stream_length(cfg), 18);
  const auto a = critical_value_schedule(data, m, model, cfg);
  const auto b = critical_value_schedule(data, m, model, cfg);
  REQUIRE(a.c_k.size() == 40);
  CHECK(a.c_k == b.c_k);
  CHECK(a.blocks.size() == 3);
  CHECK(a.selection_counts.size() == 4);
  for (std::size_t k = 1; k <= 40; ++k) {
    CHECK(a.c_k[k - 1] > 0.0);
    CHECK(std::isfinite(a.c_k[k - 1]));
  }
  for (const auto& blk : a.blocks) {
    CHECK(blk.mean > 0.0);
    CHECK(std::isfinite(blk.mean));
  }
  // Block 0's schedule is the quantile of its own draws.
  CHECK(a.c_k[0] == Approx(a.blocks[0].upper_quantile));

  const auto short_data = growth_data(m + 19, 18);
  CHECK_THROWS_AS(critical_value_schedule(short_data, m, model, cfg), DomainError);

  cfg.window = 2;
  CHECK(required_stream_length(cfg) == 30);
  cfg.L = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("null growth block statistic is finite and matches re-evaluation", "[bootstrap]") {
  const auto model = growth_model();
  const std::size_t m = 25, T_m = 100;
  const auto data = growth_data(m, 50);
  const auto fit = fit_nls(data, model, {});
  const auto stat = make_block_statistic(data, model, fit, fit, T_m, 0.25);
  Matrix grads(2, static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    grads.col(static_cast<Eigen::Index>(i)) = model.gradient(data[i].x, fit.beta_hat);
  }
  double mean = 0.0;
  for (std::size_t r = 0; r < 500; ++r) {
    auto rng = substream(51, StreamTag::test, r);
    auto copy = rng;
    const double v = stat.sample(rng);
    mean += v;
    if (r < 5) {
      const auto e = bootstrap_errors(fit.residuals, m + T_m, copy);
      CHECK(v == Approx(oracle::block_statistic(m, 0, T_m, 0.25, e, grads, fit.B_m,
                                                fit.A_m.squaredNorm()))
                     .epsilon(1e-10));
    }
  }
  mean /= 500.0;
  CHECK(std::isfinite(mean));
  CHECK(mean > 0.0);
}
