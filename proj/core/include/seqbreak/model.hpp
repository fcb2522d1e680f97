#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqbreak {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  double clamp(double v) const noexcept { return v < lo ? lo : (v > hi ? hi : v); }
};

/// A parametric regression family y = f(x; beta) + error.
///
/// `f` and `grad_f` receive the regressor (length p) and the parameter
/// (length q); `grad_f` writes the q partial derivatives with respect to
/// beta into its output span. The Hessian is deliberately absent: no
/// computed statistic needs it.
struct ModelSpec {
  using ValueFn = std::function<double(std::span<const double> x, std::span<const double> beta)>;
  using GradientFn = std::function<void(std::span<const double> x, std::span<const double> beta,
                                        std::span<double> grad)>;

  std::string name;
  std::size_t p = 1;
  std::size_t q = 1;
  ValueFn f;
  GradientFn grad_f;
  std::vector<Interval> theta_box;

  double value(std::span<const double> x, const Vector& beta) const;
  Vector gradient(std::span<const double> x, const Vector& beta) const;

  bool in_box(const Vector& beta) const;
  Vector clamp_to_box(const Vector& beta) const;
};

/// f(x; b) = b1 - exp(-b2 x).
ModelSpec growth_model();

/// f(x; b) = b1 exp(-b1 x) + b2 exp(-b2 x).
ModelSpec compartmental_model();

/// f(x; b) = b x, the one-parameter linear family without intercept.
ModelSpec linear_model(Interval box = {-1e3, 1e3});

/// Built-in model by name: "growth", "compartmental" or "linear".
/// Throws DomainError for unknown names.
ModelSpec model_by_name(std::string_view name);

/// Parameter used for the two example models in the simulation studies.
Vector default_beta0(std::string_view name);

/// Scalar regressor X ~ N(0, sigma2_x).
struct GaussianRegressorLaw {
  double sigma2_x = 1.0;
};

/// A = E[grad f(X; beta)], B = E[grad f grad f^t], D = sqrt(A^t B^-1 A), D_A = A^t A.
struct PopulationMoments {
  Vector A;
  Matrix B;
  double D = 0.0;
  double D_A = 0.0;
  double cond_B = 0.0;
};

/// Largest condition number accepted for B or B_m before reporting SingularMoments.
inline constexpr double kMaxConditionNumber = 1e12;

/// Condition number of the unit-diagonal rescaling S B S, S = diag(B_ii^-1/2).
/// Returns +inf when B has a non-positive diagonal entry or eigenvalue.
double scaled_condition_number(const Matrix& B);

/// (A^t B^-1 A)^{1/2} by a Cholesky solve on the diagonally rescaled system.
/// Throws SingularMoments when B is not positive definite.
double compute_D(const Vector& A, const Matrix& B);

/// Gaussian-regressor moments by Gauss-Hermite quadrature. Each entry of A
/// and B is integrated with the rule recentred on the peak of its integrand,
/// which keeps exponential families such as exp(-b x) accurate for large b.
///
/// Requires p == 1, beta inside theta_box and n_nodes >= 16.
PopulationMoments gaussian_moments(const ModelSpec& model, GaussianRegressorLaw law,
                                   const Vector& beta, std::size_t n_nodes = 64);

} // namespace seqbreak
