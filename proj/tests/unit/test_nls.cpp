#include "seqbreak/errors.hpp"
#include "seqbreak/nls.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

using namespace seqbreak;
using Catch::Approx;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

std::vector<Observation> simulate(const ModelSpec& model, const Vector& beta, std::size_t n,
                                  double noise_sd, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> x(0.0, 1.0), e(0.0, noise_sd > 0 ? noise_sd : 1.0);
  std::vector<Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.x = {x(gen)};
    const double eps = e(gen);
    o.y = model.value(o.x, beta) + (noise_sd > 0 ? eps : 0.0);
    out.push_back(o);
  }
  return out;
}

} // namespace

TEST_CASE("noiseless linear data is interpolated", "[nls]") {
  const std::vector<Observation> data = {{{1.0}, 2.0}, {{2.0}, 4.0}, {{3.0}, 6.0}};
  const auto fit = fit_nls(data, linear_model(), {});
  CHECK(fit.beta_hat[0] == Approx(2.0).epsilon(1e-12));
  CHECK(fit.sigma2_hat == Approx(0.0).margin(1e-20));
  CHECK(fit.m == 3);
  CHECK(fit.residuals.size() == 3);
}

TEST_CASE("noiseless growth data recovers the parameter", "[nls]") {
  const auto model = growth_model();
  const auto data = simulate(model, v2(0.5, 1.0), 200, 0.0, 3);
  const auto fit = fit_nls(data, model, {});
  CHECK(fit.beta_hat[0] == Approx(0.5).margin(1e-6));
  CHECK(fit.beta_hat[1] == Approx(1.0).margin(1e-6));
  CHECK(fit.sigma2_hat <= 1e-12);
  CHECK_FALSE(fit.on_boundary);
}

TEST_CASE("noisy compartmental fit lands near the truth", "[nls]") {
  const auto model = compartmental_model();
  const auto data = simulate(model, v2(1.2, 1.0), 400, 0.3, 4);
  const auto fit = fit_nls(data, model, {});
  // Sum of exponentials is symmetric in (b1, b2); compare as a set.
  const double lo = std::min(fit.beta_hat[0], fit.beta_hat[1]);
  const double hi = std::max(fit.beta_hat[0], fit.beta_hat[1]);
  CHECK(lo == Approx(1.0).margin(0.15));
  CHECK(hi == Approx(1.2).margin(0.15));
}

TEST_CASE("fit diagnostics are recomputable", "[nls]") {
  const auto model = growth_model();
  const auto data = simulate(model, v2(0.5, 1.0), 60, 0.7, 5);
  const auto fit = fit_nls(data, model, {});
  double ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data[i].y - model.value(data[i].x, fit.beta_hat);
    CHECK(fit.residuals[i] == r);
    CHECK(residual(data[i], model, fit.beta_hat) == r);
    ss += r * r;
  }
  CHECK(fit.sigma2_hat == Approx(ss / (60.0 - 2.0)).epsilon(1e-14));

  Matrix B = Matrix::Zero(2, 2);
  Vector A = Vector::Zero(2);
  for (const auto& o : data) {
    const Vector g = model.gradient(o.x, fit.beta_hat);
    B += g * g.transpose();
    A += g;
  }
  B /= 60.0;
  A /= 60.0;
  CHECK(fit.B_m == B);
  CHECK(fit.A_m == A);
  CHECK(fit.B_m == empirical_B(data, model, fit.beta_hat));
  CHECK(fit.B_m.transpose() == fit.B_m);
  CHECK(std::isfinite(fit.cond_B));
}

TEST_CASE("degenerate windows are rejected", "[nls]") {
  const auto model = growth_model();
  const auto data = simulate(model, v2(0.5, 1.0), 2, 0.1, 6);
  CHECK_THROWS_AS(fit_nls(data, model, {}), DegenerateWindow);
  FitOptions bad;
  bad.grad_tol = 0.0;
  CHECK_THROWS_AS(fit_nls(simulate(model, v2(0.5, 1.0), 10, 0.1, 6), model, bad), DomainError);
}

TEST_CASE("a single start that cannot converge reports NoConvergence", "[nls]") {
  const auto model = growth_model();
  const auto data = simulate(model, v2(0.5, 1.0), 50, 0.5, 8);
  FitOptions opts;
  opts.init = v2(-9.0, 9.0);
  opts.max_iter = 1;
  CHECK_THROWS_AS(fit_nls(data, model, opts), NoConvergence);
}

TEST_CASE("collinear gradients are reported as SingularMoments", "[nls]") {
  // Every regressor is zero: the growth gradient is (1, 0) at every point.
  std::vector<Observation> data(10, Observation{{0.0}, -0.5});
  CHECK_THROWS_AS(fit_nls(data, growth_model(), {}), SingularMoments);
}

TEST_CASE("fits are invariant to row permutation", "[nls][property]") {
  const auto model = growth_model();
  auto data = simulate(model, v2(0.5, 1.0), 80, 0.7, 9);
  const auto a = fit_nls(data, model, {});
  std::mt19937_64 gen(1);
  for (int t = 0; t < 3; ++t) {
    std::shuffle(data.begin(), data.end(), gen);
    const auto b = fit_nls(data, model, {});
    CHECK((a.beta_hat - b.beta_hat).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("linear fits are scale equivariant", "[nls][property]") {
  const auto model = linear_model();
  Vector beta(1);
  beta << 1.7;
  const auto data = simulate(model, beta, 40, 0.4, 10);
  const auto base = fit_nls(data, model, {});
  for (double c : {0.5, 3.0}) {
    auto scaled = data;
    for (auto& o : scaled) {
      o.y *= c;
    }
    const auto fit = fit_nls(scaled, model, {});
    CHECK(fit.beta_hat[0] == Approx(c * base.beta_hat[0]).epsilon(1e-10));
    CHECK(fit.sigma2_hat == Approx(c * c * base.sigma2_hat).epsilon(1e-10));
  }
}

TEST_CASE("variance estimators agree on long null samples", "[nls]") {
  const auto model = growth_model();
  const double s2 = 0.5;
  const auto data = simulate(model, v2(0.5, 1.0), 10000, std::sqrt(s2), 12);
  const auto fit = fit_nls(data, model, {});
  CHECK(std::abs(fit.sigma2_hat - s2) <= 0.1 * s2);
  CHECK(std::abs(sigma2_pooled(fit.residuals) - s2) <= 0.1 * s2);
}

TEST_CASE("pooled variance examples", "[nls]") {
  CHECK(sigma2_pooled(std::vector<double>{1.0, -1.0}) == 1.0);
  CHECK(sigma2_pooled(std::vector<double>{4.2, 4.2, 4.2}) == 0.0);
  CHECK(sigma2_pooled(std::vector<double>{0.0, 1.0, 2.0, 3.0}) == 1.25);
  CHECK_THROWS_AS(sigma2_pooled(std::vector<double>{}), EmptySample);
}

TEST_CASE("residual examples", "[nls]") {
  CHECK(residual({{0.0}, -0.5}, growth_model(), v2(0.5, 1.0)) == 0.0);
  CHECK(residual({{0.0}, 0.5}, growth_model(), v2(0.5, 1.0)) == 1.0);
  CHECK(residual({{0.0}, 3.2}, compartmental_model(), v2(1.2, 1.0)) == Approx(1.0).epsilon(1e-14));
}
