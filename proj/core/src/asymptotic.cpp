#include "seqbreak/asymptotic.hpp"

#include "seqbreak/errors.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace seqbreak {
namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 0.5)) {
    throw DomainError("gamma must lie in [0, 0.5)");
  }
}

inline double limit_weight(double t, double gamma, double D) {
  return (1.0 + t - D * D * t) / std::pow(t, gamma);
}

std::vector<double> grid_weights(const WienerGrid& grid, double gamma, double D) {
  std::vector<double> w(grid.n_grid);
  for (std::size_t i = 0; i < grid.n_grid; ++i) {
    w[i] = limit_weight(grid.point(i), gamma, D);
  }
  return w;
}

// Fused path simulation and weighted maximum; no path storage.
double draw_sup(const WienerGrid& grid, std::span<const double> weights, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double step_sd = std::sqrt(grid.spacing());
  double w = 0.0;
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.n_grid; ++i) {
    w += step_sd * normal(rng);
    const double v = weights[i] * std::abs(w);
    if (v > sup) {
      sup = v;
    }
  }
  return sup;
}

void check_grid(double D, const LimitHorizon& horizon, const WienerGrid& grid) {
  if (grid.n_grid == 0) {
    throw DomainError("Wiener grid needs at least one point");
  }
  const double expected = limit_upper_time(D, horizon);
  if (std::abs(grid.t_upper - expected) > 1e-12 * std::max(1.0, expected)) {
    throw DomainError("Wiener grid upper time does not match the horizon");
  }
}

} // namespace

double limit_upper_time(double D, const LimitHorizon& horizon) {
  if (!(D > 0.0)) {
    throw DomainError("D must be positive");
  }
  if (const auto* closed = std::get_if<ClosedEndLimit>(&horizon)) {
    if (!(closed->T > 0.0)) {
      throw DomainError("closed-end limit needs T > 0");
    }
    return closed->T / (1.0 + D * D * closed->T);
  }
  return 1.0 / (D * D);
}

WienerGrid WienerGrid::for_horizon(double D, const LimitHorizon& horizon, std::size_t n_grid) {
  return WienerGrid{n_grid, limit_upper_time(D, horizon)};
}

WienerPath simulate_wiener(const WienerGrid& grid, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double step_sd = std::sqrt(grid.spacing());
  WienerPath path;
  path.times.resize(grid.n_grid);
  path.values.resize(grid.n_grid);
  double w = 0.0;
  for (std::size_t i = 0; i < grid.n_grid; ++i) {
    w += step_sd * normal(rng);
    path.times[i] = grid.point(i);
    path.values[i] = w;
  }
  return path;
}

WienerPath refine_by_bridge(const WienerPath& path, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  WienerPath fine;
  fine.times.reserve(2 * path.times.size());
  fine.values.reserve(2 * path.values.size());
  double t_prev = 0.0;
  double w_prev = 0.0;
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const double t = path.times[i];
    const double w = path.values[i];
    const double dt = t - t_prev;
    // Midpoint of a Brownian bridge: mean is the chord, variance dt / 4.
    fine.times.push_back(0.5 * (t_prev + t));
    fine.values.push_back(0.5 * (w_prev + w) + 0.5 * std::sqrt(dt) * normal(rng));
    fine.times.push_back(t);
    fine.values.push_back(w);
    t_prev = t;
    w_prev = w;
  }
  return fine;
}

double weighted_sup(const WienerPath& path, double gamma, double D, double t_limit) {
  check_gamma(gamma);
  if (!(D > 0.0)) {
    throw DomainError("D must be positive");
  }
  double sup = 0.0;
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const double t = path.times[i];
    if (t > t_limit) {
      break;
    }
    const double v = limit_weight(t, gamma, D) * std::abs(path.values[i]);
    if (v > sup) {
      sup = v;
    }
  }
  return sup;
}

double sample_V(double gamma, double D, const LimitHorizon& horizon, const WienerGrid& grid,
                Rng& rng) {
  check_gamma(gamma);
  check_grid(D, horizon, grid);
  const auto weights = grid_weights(grid, gamma, D);
  return draw_sup(grid, weights, rng);
}

double quantile(std::span<const double> sample, double alpha) {
  if (sample.empty()) {
    throw EmptySample("quantile: empty sample");
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw DomainError("quantile: alpha must lie in [0, 1)");
  }
  const double n = static_cast<double>(sample.size());
  // The small offset keeps exact ranks such as 0.95 * 100 from rounding up.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sample.size());
  std::vector<double> copy(sample.begin(), sample.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(rank - 1), copy.end());
  return copy[rank - 1];
}

double quantile_standard_error(std::span<const double> sample, double alpha, std::uint64_t seed,
                               std::size_t resamples) {
  if (sample.empty()) {
    throw EmptySample("quantile_standard_error: empty sample");
  }
  if (resamples < 2) {
    return 0.0;
  }
  std::vector<double> estimates(resamples);
  std::vector<double> buffer(sample.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    Rng rng = substream(seed, StreamTag::quantile_error, b);
    std::uniform_int_distribution<std::size_t> pick(0, sample.size() - 1);
    for (auto& v : buffer) {
      v = sample[pick(rng)];
    }
    estimates[b] = quantile(buffer, alpha);
  }
  double mean = 0.0;
  for (double e : estimates) {
    mean += e;
  }
  mean /= static_cast<double>(resamples);
  double ss = 0.0;
  for (double e : estimates) {
    ss += (e - mean) * (e - mean);
  }
  return std::sqrt(ss / static_cast<double>(resamples - 1));
}

std::vector<double> simulate_V_sample(double gamma, double D, const LimitHorizon& horizon,
                                      std::size_t M, std::size_t n_grid, std::uint64_t seed,
                                      std::size_t threads) {
  check_gamma(gamma);
  const WienerGrid grid = WienerGrid::for_horizon(D, horizon, n_grid);
  if (grid.n_grid == 0) {
    throw DomainError("Wiener grid needs at least one point");
  }
  const auto weights = grid_weights(grid, gamma, D);
  std::vector<double> draws(M);
  detail::parallel_for(M, threads, [&](std::size_t r) {
    Rng rng = substream(seed, StreamTag::wiener_path, r);
    draws[r] = draw_sup(grid, weights, rng);
  });
  return draws;
}

CalibrationResult critical_value(double gamma, double alpha, double D, const LimitHorizon& horizon,
                                 std::size_t M, std::size_t n_grid, std::uint64_t seed,
                                 std::size_t threads) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("critical_value: alpha must lie in (0, 1)");
  }
  if (M < 1000) {
    throw DomainError("critical_value: at least 1000 replications are required");
  }
  const auto draws = simulate_V_sample(gamma, D, horizon, M, n_grid, seed, threads);
  CalibrationResult out;
  out.c_alpha = quantile(draws, alpha);
  out.gamma = gamma;
  out.alpha = alpha;
  out.D = D;
  out.horizon = horizon;
  out.M = M;
  out.n_grid = n_grid;
  out.seed = seed;
  out.standard_error = quantile_standard_error(draws, alpha, seed);
  return out;
}

bool CalibrationResult::operator==(const CalibrationResult& o) const {
  const bool same_horizon =
      horizon.index() == o.horizon.index() &&
      (std::holds_alternative<OpenEndLimit>(horizon) ||
       std::get<ClosedEndLimit>(horizon).T == std::get<ClosedEndLimit>(o.horizon).T);
  return c_alpha == o.c_alpha && gamma == o.gamma && alpha == o.alpha && D == o.D &&
         same_horizon && M == o.M && n_grid == o.n_grid && seed == o.seed &&
         standard_error == o.standard_error;
}

} // namespace seqbreak
