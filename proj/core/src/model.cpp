#include "seqbreak/model.hpp"

#include "seqbreak/errors.hpp"
#include "seqbreak/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqbreak {

double ModelSpec::value(std::span<const double> x, const Vector& beta) const {
  return f(x, std::span<const double>(beta.data(), static_cast<std::size_t>(beta.size())));
}

Vector ModelSpec::gradient(std::span<const double> x, const Vector& beta) const {
  Vector g(static_cast<Eigen::Index>(q));
  grad_f(x, std::span<const double>(beta.data(), static_cast<std::size_t>(beta.size())),
         std::span<double>(g.data(), q));
  return g;
}

bool ModelSpec::in_box(const Vector& beta) const {
  if (static_cast<std::size_t>(beta.size()) != theta_box.size()) {
    return false;
  }
  for (std::size_t j = 0; j < theta_box.size(); ++j) {
    if (!theta_box[j].contains(beta[static_cast<Eigen::Index>(j)])) {
      return false;
    }
  }
  return true;
}

Vector ModelSpec::clamp_to_box(const Vector& beta) const {
  Vector out = beta;
  for (std::size_t j = 0; j < theta_box.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = theta_box[j].clamp(out[static_cast<Eigen::Index>(j)]);
  }
  return out;
}

ModelSpec growth_model() {
  ModelSpec m;
  m.name = "growth";
  m.p = 1;
  m.q = 2;
  m.f = [](std::span<const double> x, std::span<const double> b) {
    return b[0] - std::exp(-b[1] * x[0]);
  };
  m.grad_f = [](std::span<const double> x, std::span<const double> b, std::span<double> g) {
    g[0] = 1.0;
    g[1] = x[0] * std::exp(-b[1] * x[0]);
  };
  m.theta_box = {{-10.0, 10.0}, {0.01, 10.0}};
  return m;
}

ModelSpec compartmental_model() {
  ModelSpec m;
  m.name = "compartmental";
  m.p = 1;
  m.q = 2;
  m.f = [](std::span<const double> x, std::span<const double> b) {
    return b[0] * std::exp(-b[0] * x[0]) + b[1] * std::exp(-b[1] * x[0]);
  };
  m.grad_f = [](std::span<const double> x, std::span<const double> b, std::span<double> g) {
    g[0] = (1.0 - b[0] * x[0]) * std::exp(-b[0] * x[0]);
    g[1] = (1.0 - b[1] * x[0]) * std::exp(-b[1] * x[0]);
  };
  m.theta_box = {{0.01, 10.0}, {0.01, 10.0}};
  return m;
}

ModelSpec linear_model(Interval box) {
  ModelSpec m;
  m.name = "linear";
  m.p = 1;
  m.q = 1;
  m.f = [](std::span<const double> x, std::span<const double> b) { return b[0] * x[0]; };
  m.grad_f = [](std::span<const double> x, std::span<const double>, std::span<double> g) {
    g[0] = x[0];
  };
  m.theta_box = {box};
  return m;
}

ModelSpec model_by_name(std::string_view name) {
  if (name == "growth") {
    return growth_model();
  }
  if (name == "compartmental") {
    return compartmental_model();
  }
  if (name == "linear") {
    return linear_model();
  }
  throw DomainError("unknown model '" + std::string(name) + "'");
}

Vector default_beta0(std::string_view name) {
  if (name == "growth") {
    return Vector{{0.5, 1.0}};
  }
  if (name == "compartmental") {
    return Vector{{1.2, 1.0}};
  }
  if (name == "linear") {
    return Vector{{1.0}};
  }
  throw DomainError("unknown model '" + std::string(name) + "'");
}

double scaled_condition_number(const Matrix& B) {
  const Eigen::Index q = B.rows();
  if (q == 0 || B.cols() != q) {
    return std::numeric_limits<double>::infinity();
  }
  Vector scale(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!(B(i, i) > 0.0) || !std::isfinite(B(i, i))) {
      return std::numeric_limits<double>::infinity();
    }
    scale[i] = 1.0 / std::sqrt(B(i, i));
  }
  const Matrix scaled = scale.asDiagonal() * B * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(scaled, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return hi / lo;
}

double compute_D(const Vector& A, const Matrix& B) {
  const Eigen::Index q = B.rows();
  if (B.cols() != q || A.size() != q) {
    throw DomainError("compute_D: dimension mismatch");
  }
  Vector scale(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!(B(i, i) > 0.0)) {
      throw SingularMoments("compute_D: B has a non-positive diagonal entry");
    }
    scale[i] = 1.0 / std::sqrt(B(i, i));
  }
  const Matrix scaled = scale.asDiagonal() * B * scale.asDiagonal();
  const Vector a = scale.asDiagonal() * A;
  Eigen::LLT<Matrix> llt(scaled);
  if (llt.info() != Eigen::Success) {
    throw SingularMoments("compute_D: B is not positive definite");
  }
  const double quad = a.dot(llt.solve(a));
  return std::sqrt(std::max(quad, 0.0));
}

namespace {

// Integrand sign and log-magnitude for every entry, indexed as A then the
// upper triangle of B in row-major order.
struct EntryLayout {
  std::size_t q;
  std::size_t count() const { return q + q * (q + 1) / 2; }
};

void entry_logs(const Vector& g, std::size_t q, std::vector<double>& logs) {
  std::size_t e = 0;
  for (std::size_t a = 0; a < q; ++a) {
    logs[e++] = std::log(std::abs(g[static_cast<Eigen::Index>(a)]));
  }
  for (std::size_t a = 0; a < q; ++a) {
    for (std::size_t b = a; b < q; ++b) {
      logs[e++] = logs[a] + logs[b];
    }
  }
}

} // namespace

PopulationMoments gaussian_moments(const ModelSpec& model, GaussianRegressorLaw law,
                                   const Vector& beta, std::size_t n_nodes) {
  if (model.p != 1) {
    throw DomainError("gaussian_moments: only scalar regressors are supported");
  }
  if (!(law.sigma2_x > 0.0)) {
    throw DomainError("gaussian_moments: sigma2_x must be positive");
  }
  if (n_nodes < 16) {
    throw DomainError("gaussian_moments: at least 16 nodes are required");
  }
  if (!model.in_box(beta)) {
    throw DomainError("gaussian_moments: beta outside the parameter box");
  }

  const std::size_t q = model.q;
  const double sigma = std::sqrt(law.sigma2_x);
  const EntryLayout layout{q};
  const std::size_t n_entries = layout.count();

  // Locate the peak of |h(x)| phi(x) for every entry on a coarse grid in
  // standardised units; the Gauss-Hermite rule is then centred there.
  constexpr double kSearchHalfWidth = 60.0;
  constexpr double kSearchStep = 0.05;
  std::vector<double> best_log(n_entries, -std::numeric_limits<double>::infinity());
  std::vector<double> centre(n_entries, 0.0);
  std::vector<double> logs(n_entries);
  for (double z = -kSearchHalfWidth; z <= kSearchHalfWidth + 1e-12; z += kSearchStep) {
    const double x = sigma * z;
    const Vector g = model.gradient(std::span<const double>(&x, 1), beta);
    if (!g.allFinite()) {
      continue;
    }
    entry_logs(g, q, logs);
    for (std::size_t e = 0; e < n_entries; ++e) {
      const double v = logs[e] - 0.5 * z * z;
      if (std::isfinite(v) && v > best_log[e]) {
        best_log[e] = v;
        centre[e] = z;
      }
    }
  }

  const QuadratureRule rule = gauss_hermite_normal(n_nodes);
  std::vector<double> sums(n_entries, 0.0);
  for (std::size_t e = 0; e < n_entries; ++e) {
    const double mu = centre[e];
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double z = rule.nodes[i] + mu;
      const double x = sigma * z;
      const Vector g = model.gradient(std::span<const double>(&x, 1), beta);
      double ga;
      double gb = 1.0;
      if (e < q) {
        ga = g[static_cast<Eigen::Index>(e)];
      } else {
        // Map the flat index back to (a, b) in the upper triangle.
        std::size_t idx = e - q;
        std::size_t a = 0;
        while (idx >= q - a) {
          idx -= q - a;
          ++a;
        }
        ga = g[static_cast<Eigen::Index>(a)];
        gb = g[static_cast<Eigen::Index>(a + idx)];
      }
      if (ga == 0.0 || gb == 0.0) {
        continue;
      }
      // h * phi(z) / phi(node), combined in log space so that large
      // gradients far from the centre cannot overflow before the tilt.
      const double log_term = std::log(std::abs(ga)) + std::log(std::abs(gb)) -
                              rule.nodes[i] * mu - 0.5 * mu * mu;
      const double sign = ((ga < 0.0) != (gb < 0.0)) ? -1.0 : 1.0;
      acc += rule.weights[i] * sign * std::exp(log_term);
    }
    sums[e] = acc;
  }

  PopulationMoments out;
  out.A.resize(static_cast<Eigen::Index>(q));
  out.B.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  std::size_t e = 0;
  for (std::size_t a = 0; a < q; ++a) {
    out.A[static_cast<Eigen::Index>(a)] = sums[e++];
  }
  for (std::size_t a = 0; a < q; ++a) {
    for (std::size_t b = a; b < q; ++b) {
      const auto ia = static_cast<Eigen::Index>(a);
      const auto ib = static_cast<Eigen::Index>(b);
      out.B(ia, ib) = sums[e];
      out.B(ib, ia) = sums[e];
      ++e;
    }
  }
  if (!out.A.allFinite() || !out.B.allFinite()) {
    throw SingularMoments("gaussian_moments: moments overflow double precision");
  }
  out.cond_B = scaled_condition_number(out.B);
  if (!(out.cond_B <= kMaxConditionNumber)) {
    throw SingularMoments("gaussian_moments: B is singular or ill-conditioned");
  }
  out.D = compute_D(out.A, out.B);
  out.D_A = out.A.squaredNorm();
  return out;
}

} // namespace seqbreak
