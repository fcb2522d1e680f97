#include "seqbreak/nls.hpp"

#include "seqbreak/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace seqbreak {
namespace {

constexpr std::array<unsigned, 8> kHaltonBases{2, 3, 5, 7, 11, 13, 17, 19};

double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

std::vector<Vector> multistart_points(const ModelSpec& model, std::size_t count) {
  std::vector<Vector> starts;
  starts.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    Vector s(static_cast<Eigen::Index>(model.q));
    for (std::size_t j = 0; j < model.q; ++j) {
      const Interval& box = model.theta_box[j];
      const double u = radical_inverse(i, kHaltonBases[j % kHaltonBases.size()]);
      s[static_cast<Eigen::Index>(j)] = box.lo + u * (box.hi - box.lo);
    }
    starts.push_back(std::move(s));
  }
  std::sort(starts.begin(), starts.end(), [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  return starts;
}

struct Residuals {
  Vector r;
  Matrix J;
  double sse = 0.0;
};

double sum_of_squares(std::span<const Observation> data, const ModelSpec& model, const Vector& beta) {
  double s = 0.0;
  for (const auto& obs : data) {
    const double e = obs.y - model.value(obs.x, beta);
    s += e * e;
  }
  return s;
}

void evaluate(std::span<const Observation> data, const ModelSpec& model, const Vector& beta,
              Residuals& out) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto q = static_cast<Eigen::Index>(model.q);
  out.r.resize(n);
  out.J.resize(n, q);
  std::vector<double> g(model.q);
  const std::span<const double> b(beta.data(), model.q);
  out.sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& obs = data[static_cast<std::size_t>(i)];
    out.r[i] = obs.y - model.f(obs.x, b);
    model.grad_f(obs.x, b, g);
    for (Eigen::Index j = 0; j < q; ++j) {
      out.J(i, j) = g[static_cast<std::size_t>(j)];
    }
    out.sse += out.r[i] * out.r[i];
  }
}

struct LocalResult {
  Vector beta;
  double sse = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

LocalResult levenberg_marquardt(std::span<const Observation> data, const ModelSpec& model,
                                const Vector& start, const FitOptions& opts) {
  const double n = static_cast<double>(data.size());
  LocalResult res;
  res.beta = model.clamp_to_box(start);
  Residuals cur;
  evaluate(data, model, res.beta, cur);
  if (!std::isfinite(cur.sse)) {
    return res;
  }
  double lambda = opts.lm_lambda0;
  bool stalled = false;
  double pg_norm = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
    res.iterations = iter + 1;
    const Matrix H = cur.J.transpose() * cur.J / n;
    const Vector grad = cur.J.transpose() * cur.r / n;
    // Projected gradient after normalising by rms(r) * rms(J), so the
    // tolerance is relative and the box projection cannot mask a bad start.
    const double scale = 1.0 + std::sqrt(cur.sse / n) * std::sqrt(std::max(H.trace(), 0.0));
    pg_norm = (model.clamp_to_box(res.beta + grad / scale) - res.beta).norm();
    if (pg_norm <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    Matrix damped = H;
    const double floor = 1e-12 * (1.0 + H.trace());
    damped.diagonal().array() += lambda * (H.diagonal().array() + floor);
    const Vector delta = damped.ldlt().solve(grad);
    const Vector candidate = model.clamp_to_box(res.beta + delta);
    const double sse = sum_of_squares(data, model, candidate);
    if (std::isfinite(sse) && sse < cur.sse) {
      res.beta = candidate;
      evaluate(data, model, res.beta, cur);
      lambda = std::max(lambda * 0.3, 1e-15);
    } else {
      lambda *= 10.0;
      if (lambda > 1e16) {
        stalled = true;
        break;
      }
    }
  }
  // No descent direction left at working precision: accept when the
  // projected gradient is already small on the square-root scale.
  if (stalled && pg_norm <= std::sqrt(opts.grad_tol)) {
    res.converged = true;
  }
  res.sse = cur.sse;
  return res;
}

} // namespace

void FitOptions::validate() const {
  if (!(grad_tol > 0.0)) {
    throw DomainError("FitOptions: grad_tol must be positive");
  }
  if (max_iter < 1) {
    throw DomainError("FitOptions: max_iter must be at least 1");
  }
  if (!init && multistart < 1) {
    throw DomainError("FitOptions: multistart must be at least 1");
  }
  if (!(lm_lambda0 > 0.0)) {
    throw DomainError("FitOptions: lm_lambda0 must be positive");
  }
}

HistoricalFit fit_nls(std::span<const Observation> data, const ModelSpec& model,
                      const FitOptions& opts) {
  opts.validate();
  if (data.size() <= model.q) {
    throw DegenerateWindow("fit_nls: window of " + std::to_string(data.size()) +
                           " observations for " + std::to_string(model.q) + " parameters");
  }
  std::vector<Vector> starts;
  if (opts.init) {
    if (static_cast<std::size_t>(opts.init->size()) != model.q) {
      throw DomainError("fit_nls: init has the wrong dimension");
    }
    starts.push_back(*opts.init);
  } else {
    starts = multistart_points(model, opts.multistart);
  }

  LocalResult best;
  std::size_t total_iterations = 0;
  for (const auto& start : starts) {
    LocalResult local = levenberg_marquardt(data, model, start, opts);
    total_iterations += local.iterations;
    if (local.converged && local.sse < best.sse) {
      best = std::move(local);
    }
  }
  if (!best.converged) {
    throw NoConvergence("fit_nls: no start reached the gradient tolerance within " +
                        std::to_string(opts.max_iter) + " iterations");
  }

  HistoricalFit fit;
  fit.m = data.size();
  fit.beta_hat = best.beta;
  fit.iterations = total_iterations;
  fit.residuals = residuals(data, model, fit.beta_hat);
  double sse = 0.0;
  for (double e : fit.residuals) {
    sse += e * e;
  }
  fit.objective = sse;
  fit.sigma2_hat = sse / static_cast<double>(fit.m - model.q);
  fit.A_m = empirical_A(data, model, fit.beta_hat);
  fit.B_m = empirical_B(data, model, fit.beta_hat);
  fit.cond_B = scaled_condition_number(fit.B_m);
  if (!(fit.cond_B <= kMaxConditionNumber)) {
    throw SingularMoments("fit_nls: B_m is singular or ill-conditioned (cond = " +
                          std::to_string(fit.cond_B) + ")");
  }
  for (std::size_t j = 0; j < model.q; ++j) {
    const double v = fit.beta_hat[static_cast<Eigen::Index>(j)];
    if (v <= model.theta_box[j].lo || v >= model.theta_box[j].hi) {
      fit.on_boundary = true;
    }
  }
  return fit;
}

double sigma2_pooled(std::span<const double> errors) {
  if (errors.empty()) {
    throw EmptySample("sigma2_pooled: empty sample");
  }
  double mean = 0.0;
  for (double e : errors) {
    mean += e;
  }
  mean /= static_cast<double>(errors.size());
  double ss = 0.0;
  for (double e : errors) {
    ss += (e - mean) * (e - mean);
  }
  return ss / static_cast<double>(errors.size());
}

double residual(const Observation& obs, const ModelSpec& model, const Vector& beta) {
  return obs.y - model.value(obs.x, beta);
}

std::vector<double> residuals(std::span<const Observation> data, const ModelSpec& model,
                              const Vector& beta) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& obs : data) {
    out.push_back(residual(obs, model, beta));
  }
  return out;
}

Matrix empirical_B(std::span<const Observation> data, const ModelSpec& model, const Vector& beta) {
  const auto q = static_cast<Eigen::Index>(model.q);
  Matrix B = Matrix::Zero(q, q);
  for (const auto& obs : data) {
    const Vector g = model.gradient(obs.x, beta);
    B.noalias() += g * g.transpose();
  }
  return B / static_cast<double>(data.size());
}

Vector empirical_A(std::span<const Observation> data, const ModelSpec& model, const Vector& beta) {
  Vector A = Vector::Zero(static_cast<Eigen::Index>(model.q));
  for (const auto& obs : data) {
    A += model.gradient(obs.x, beta);
  }
  return A / static_cast<double>(data.size());
}

} // namespace seqbreak
