#pragma once

#include "seqbreak/random.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace seqbreak {

/// Limit law for T_m / m -> infinity: sup over [0, 1/D^2].
struct OpenEndLimit {};

/// Limit law for T_m / m -> T: sup over [0, T / (1 + D^2 T)].
struct ClosedEndLimit {
  double T = 1.0;
};

using LimitHorizon = std::variant<OpenEndLimit, ClosedEndLimit>;

/// Right end of the time interval of the limit supremum.
double limit_upper_time(double D, const LimitHorizon& horizon);

/// Uniform grid t_i = t_upper * i / n_grid, i = 1..n_grid (t = 0 excluded).
struct WienerGrid {
  std::size_t n_grid = 8192;
  double t_upper = 1.0;

  double point(std::size_t i) const noexcept {
    return t_upper * static_cast<double>(i + 1) / static_cast<double>(n_grid);
  }
  double spacing() const noexcept { return t_upper / static_cast<double>(n_grid); }

  static WienerGrid for_horizon(double D, const LimitHorizon& horizon, std::size_t n_grid);
};

/// A sampled Brownian path on a grid: values[i] = W(times[i]).
struct WienerPath {
  std::vector<double> times;
  std::vector<double> values;
};

/// Cumulative Gaussian increments over the grid.
WienerPath simulate_wiener(const WienerGrid& grid, Rng& rng);

/// Doubles the resolution of a path by Brownian-bridge midpoints; every
/// original point is retained, so sups over the refined grid dominate.
WienerPath refine_by_bridge(const WienerPath& path, Rng& rng);

/// max over path points with t <= t_limit of (1 + t - D^2 t) |W(t)| / t^gamma.
double weighted_sup(const WienerPath& path, double gamma, double D, double t_limit);

/// One draw of the discretised V_gamma. Throws DomainError if D <= 0, or if
/// gamma is outside [0, 0.5) or the grid does not match the horizon.
double sample_V(double gamma, double D, const LimitHorizon& horizon, const WienerGrid& grid,
                Rng& rng);

/// Order statistic at 1-based rank ceil((1 - alpha) n).
double quantile(std::span<const double> sample, double alpha);

struct CalibrationResult {
  double c_alpha = 0.0;
  double gamma = 0.0;
  double alpha = 0.05;
  double D = 1.0;
  LimitHorizon horizon = OpenEndLimit{};
  std::size_t M = 0;
  std::size_t n_grid = 0;
  std::uint64_t seed = 0;
  /// Bootstrap standard error of the empirical quantile.
  double standard_error = 0.0;

  bool operator==(const CalibrationResult& other) const;
};

/// Simulates M draws of V_gamma, replication r on substream r of `seed`,
/// and returns the empirical (1 - alpha) quantile. Output does not depend
/// on `threads`.
CalibrationResult critical_value(double gamma, double alpha, double D, const LimitHorizon& horizon,
                                 std::size_t M, std::size_t n_grid, std::uint64_t seed,
                                 std::size_t threads = 1);

/// The M simulated draws themselves, in replication order.
std::vector<double> simulate_V_sample(double gamma, double D, const LimitHorizon& horizon,
                                      std::size_t M, std::size_t n_grid, std::uint64_t seed,
                                      std::size_t threads = 1);

/// Bootstrap standard error of quantile(sample, alpha) with `resamples` resamples.
double quantile_standard_error(std::span<const double> sample, double alpha, std::uint64_t seed,
                               std::size_t resamples = 200);

} // namespace seqbreak
