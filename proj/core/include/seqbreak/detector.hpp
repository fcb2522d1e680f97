#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace seqbreak {

/// Monitoring without a horizon.
struct OpenEnd {};

/// Monitoring over k = 1..T_m.
struct ClosedEnd {
  std::size_t T_m = 0;
};

using Horizon = std::variant<OpenEnd, ClosedEnd>;

/// Alarm when |Gamma| / sigma_hat >= c.
struct AsymptoticScheme {
  double c = 0.0;
};

/// Alarm when |Gamma| / (sigma_hat * c_k) > 1, with c_k indexed from k = 1.
struct BootstrapScheme {
  std::vector<double> c_k;
};

using Scheme = std::variant<AsymptoticScheme, BootstrapScheme>;

struct MonitorConfig {
  double gamma = 0.0;
  double alpha = 0.05;
  Horizon horizon = OpenEnd{};
  Scheme scheme = AsymptoticScheme{};

  /// Throws DomainError when an invariant is violated.
  void validate() const;
};

/// Streaming CUSUM state. After an alarm, gamma_stat and tau_hat are frozen
/// while k, cum_sum and z_running keep tracking the stream.
struct DetectorState {
  std::size_t k = 0;
  double cum_sum = 0.0;
  /// |cum_sum| / g(m, k, gamma) at the last update (frozen at the alarm).
  double gamma_stat = 0.0;
  /// Running sup of the normalised statistic: |Gamma| / sigma_hat for the
  /// asymptotic scheme, |Gamma| / (sigma_hat c_k) for the bootstrap scheme.
  double z_running = 0.0;
  bool alarm = false;
  std::optional<std::size_t> tau_hat;

  bool operator==(const DetectorState&) const = default;
};

/// sqrt(m) (1 + k/m) (k/(k+m))^gamma, evaluated as m^-1/2 (m+k)^(1-gamma) k^gamma.
double boundary_g(std::size_t m, std::size_t k, double gamma);

/// Advance the detector by one residual.
DetectorState step(const DetectorState& state, double residual, std::size_t m, double sigma_hat,
                   const MonitorConfig& config);

/// Threshold that the state at index k is compared against (c or c_k).
double threshold_at(const MonitorConfig& config, std::size_t k);

/// sigma_hat^-1 sup_{1<=k<=T_m} |sum_{i<=k} e_i| / g(m, k, gamma), with T_m = record.size().
double z_statistic(std::span<const double> record, std::size_t m, double sigma_hat, double gamma);

/// sigma_hat^-1 sup_k |sum_{i<=k} e_i| / (g(m, k, gamma) c_k).
double z_statistic_bootstrap(std::span<const double> record, std::size_t m, double sigma_hat,
                             double gamma, std::span<const double> c_k);

/// sup_{1<=k<=k_max} k m^-1/2 / g(m, k, gamma) = (k_max / (m + k_max))^(1 - gamma).
double km_bound(std::size_t m, double gamma, std::size_t k_max);

} // namespace seqbreak
