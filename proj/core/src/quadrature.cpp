#include "seqbreak/quadrature.hpp"

#include "seqbreak/errors.hpp"

#include <cmath>
#include <numbers>

namespace seqbreak {

// Newton iteration on orthonormal physicists' Hermite polynomials, seeded with
// the classical asymptotic root guesses, then mapped to the N(0, 1) weight.
QuadratureRule gauss_hermite_normal(std::size_t n) {
  if (n == 0) {
    throw DomainError("gauss_hermite_normal: n must be positive");
  }
  constexpr double kPiMinusQuarter = 0.7511255444649425;
  constexpr double kTol = 1e-14;
  constexpr int kMaxIter = 100;

  const double nd = static_cast<double>(n);
  std::vector<double> x(n), w(n);
  const std::size_t half = (n + 1) / 2;
  double z = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(nd, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double deriv = 0.0;
    for (int it = 0; it < kMaxIter; ++it) {
      double p1 = kPiMinusQuarter;
      double p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
      }
      deriv = std::sqrt(2.0 * nd) * p2;
      const double previous = z;
      z = previous - p1 / deriv;
      if (std::abs(z - previous) <= kTol * std::max(1.0, std::abs(z))) {
        break;
      }
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (deriv * deriv);
    w[n - 1 - i] = w[i];
  }

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  // Ascending node order.
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = std::numbers::sqrt2 * x[n - 1 - i];
    rule.weights[i] = w[n - 1 - i] * inv_sqrt_pi;
  }
  if (n % 2 == 1) {
    rule.nodes[n / 2] = 0.0;
  }
  return rule;
}

} // namespace seqbreak
