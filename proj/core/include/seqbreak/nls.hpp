#pragma once

#include "seqbreak/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace seqbreak {

/// One (regressor, response) pair.
struct Observation {
  std::vector<double> x;
  double y = 0.0;
};

struct FitOptions {
  /// Pin the starting point. When empty, a low-discrepancy multistart is used.
  std::optional<Vector> init;
  std::size_t multistart = 8;
  double grad_tol = 1e-10;
  std::size_t max_iter = 200;
  double lm_lambda0 = 1e-3;

  void validate() const;
};

/// Least-squares fit on a window of m observations together with the
/// plug-in quantities that the detector and both calibrators consume.
struct HistoricalFit {
  std::size_t m = 0;
  Vector beta_hat;
  /// (m - q)^-1 * sum of squared residuals.
  double sigma2_hat = 0.0;
  /// m^-1 sum grad f(X_i; beta_hat).
  Vector A_m;
  /// m^-1 sum grad f grad f^t at beta_hat.
  Matrix B_m;
  std::vector<double> residuals;
  double cond_B = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  /// Some coordinate of beta_hat sits on the parameter box boundary.
  bool on_boundary = false;
};

/// Levenberg-Marquardt with box projection. Throws DegenerateWindow when
/// data.size() <= q, NoConvergence when no start reaches the gradient
/// tolerance and SingularMoments when B_m is ill-conditioned.
HistoricalFit fit_nls(std::span<const Observation> data, const ModelSpec& model,
                      const FitOptions& opts = {});

/// (n)^-1 sum (e_i - mean)^2 over the whole sample.
double sigma2_pooled(std::span<const double> errors);

/// y - f(x; beta).
double residual(const Observation& obs, const ModelSpec& model, const Vector& beta);

/// Residuals y_i - f(x_i; beta) for a batch of observations.
std::vector<double> residuals(std::span<const Observation> data, const ModelSpec& model,
                              const Vector& beta);

/// m^-1 sum grad f grad f^t, accumulated in observation order.
Matrix empirical_B(std::span<const Observation> data, const ModelSpec& model, const Vector& beta);

/// m^-1 sum grad f, accumulated in observation order.
Vector empirical_A(std::span<const Observation> data, const ModelSpec& model, const Vector& beta);

} // namespace seqbreak
