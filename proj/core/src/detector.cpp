#include "seqbreak/detector.hpp"

#include "seqbreak/errors.hpp"

#include <cmath>
#include <string>

namespace seqbreak {
namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 0.5)) {
    throw DomainError("gamma must lie in [0, 0.5)");
  }
}

// Shared by the streaming and batch paths so both round identically.
inline double normalised(double cum_sum, std::size_t m, std::size_t k, double gamma) {
  return std::abs(cum_sum) / boundary_g(m, k, gamma);
}

} // namespace

void MonitorConfig::validate() const {
  check_gamma(gamma);
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha must lie in (0, 1)");
  }
  if (const auto* closed = std::get_if<ClosedEnd>(&horizon); closed && closed->T_m == 0) {
    throw DomainError("closed-end horizon needs T_m >= 1");
  }
  if (const auto* a = std::get_if<AsymptoticScheme>(&scheme)) {
    if (!(a->c > 0.0)) {
      throw DomainError("critical value must be positive");
    }
  } else {
    const auto& b = std::get<BootstrapScheme>(scheme);
    const auto* closed = std::get_if<ClosedEnd>(&horizon);
    if (!closed) {
      throw DomainError("bootstrap critical values need a closed-end horizon");
    }
    if (b.c_k.size() != closed->T_m) {
      throw DomainError("bootstrap critical values: expected " + std::to_string(closed->T_m) +
                        " entries, got " + std::to_string(b.c_k.size()));
    }
    for (double c : b.c_k) {
      if (!(c > 0.0)) {
        throw DomainError("bootstrap critical values must be positive");
      }
    }
  }
}

double boundary_g(std::size_t m, std::size_t k, double gamma) {
  if (m == 0 || k == 0) {
    throw DomainError("boundary_g: m and k must be positive");
  }
  check_gamma(gamma);
  const double md = static_cast<double>(m);
  const double kd = static_cast<double>(k);
  return std::pow(md + kd, 1.0 - gamma) * std::pow(kd, gamma) / std::sqrt(md);
}

double threshold_at(const MonitorConfig& config, std::size_t k) {
  if (const auto* a = std::get_if<AsymptoticScheme>(&config.scheme)) {
    return a->c;
  }
  const auto& c_k = std::get<BootstrapScheme>(config.scheme).c_k;
  if (k == 0 || k > c_k.size()) {
    throw HorizonExceeded("no bootstrap critical value for k = " + std::to_string(k));
  }
  return c_k[k - 1];
}

DetectorState step(const DetectorState& state, double residual, std::size_t m, double sigma_hat,
                   const MonitorConfig& config) {
  if (!(sigma_hat > 0.0)) {
    throw DomainError("step: sigma_hat must be positive");
  }
  if (const auto* closed = std::get_if<ClosedEnd>(&config.horizon);
      closed && state.k + 1 > closed->T_m) {
    throw HorizonExceeded("step: k = " + std::to_string(state.k + 1) + " exceeds T_m = " +
                          std::to_string(closed->T_m));
  }
  DetectorState next = state;
  next.k = state.k + 1;
  next.cum_sum = state.cum_sum + residual;
  const double gamma_stat = normalised(next.cum_sum, m, next.k, config.gamma);

  bool crossed = false;
  double z = 0.0;
  if (const auto* a = std::get_if<AsymptoticScheme>(&config.scheme)) {
    z = gamma_stat / sigma_hat;
    crossed = z >= a->c;
  } else {
    const double c = threshold_at(config, next.k);
    z = gamma_stat / (sigma_hat * c);
    crossed = z > 1.0;
  }
  if (z > next.z_running) {
    next.z_running = z;
  }
  if (!state.alarm) {
    next.gamma_stat = gamma_stat;
    if (crossed) {
      next.alarm = true;
      next.tau_hat = next.k;
    }
  }
  return next;
}

double z_statistic(std::span<const double> record, std::size_t m, double sigma_hat, double gamma) {
  if (!(sigma_hat > 0.0)) {
    throw DomainError("z_statistic: sigma_hat must be positive");
  }
  double cum = 0.0;
  double sup = 0.0;
  for (std::size_t k = 1; k <= record.size(); ++k) {
    cum = cum + record[k - 1];
    const double z = normalised(cum, m, k, gamma) / sigma_hat;
    if (z > sup) {
      sup = z;
    }
  }
  return sup;
}

double z_statistic_bootstrap(std::span<const double> record, std::size_t m, double sigma_hat,
                             double gamma, std::span<const double> c_k) {
  if (!(sigma_hat > 0.0)) {
    throw DomainError("z_statistic_bootstrap: sigma_hat must be positive");
  }
  if (c_k.size() < record.size()) {
    throw DomainError("z_statistic_bootstrap: fewer critical values than observations");
  }
  double cum = 0.0;
  double sup = 0.0;
  for (std::size_t k = 1; k <= record.size(); ++k) {
    cum = cum + record[k - 1];
    const double z = normalised(cum, m, k, gamma) / (sigma_hat * c_k[k - 1]);
    if (z > sup) {
      sup = z;
    }
  }
  return sup;
}

double km_bound(std::size_t m, double gamma, std::size_t k_max) {
  if (m == 0 || k_max == 0) {
    throw DomainError("km_bound: m and k_max must be positive");
  }
  check_gamma(gamma);
  // (k/(m+k))^(1-gamma) is increasing in k, so the sup sits at k_max.
  const double ratio = static_cast<double>(k_max) / static_cast<double>(m + k_max);
  return std::pow(ratio, 1.0 - gamma);
}

} // namespace seqbreak
