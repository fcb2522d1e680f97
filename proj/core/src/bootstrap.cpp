#include "seqbreak/bootstrap.hpp"

#include "seqbreak/asymptotic.hpp"
#include "seqbreak/detector.hpp"
#include "seqbreak/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace seqbreak {
namespace {

Eigen::LLT<Matrix> factor_B(const Matrix& B_m) {
  Eigen::LLT<Matrix> llt(B_m);
  if (llt.info() != Eigen::Success) {
    throw SingularMoments("B_m is not positive definite");
  }
  return llt;
}

// Regime sum inside c1 for window l, from prefix sums P(:, i) = sum_{j<=i} grad_j.
Vector regime_sum(std::size_t m, std::size_t k, std::size_t l, const Matrix& prefix) {
  const auto col = [&](std::size_t i) { return prefix.col(static_cast<Eigen::Index>(i)); };
  if (l <= k) {
    return col(m + l) - col(m);
  }
  if (l < m + k) {
    return col(m + k) - col(m + k - l);
  }
  return (static_cast<double>(l) / static_cast<double>(m + k)) * col(m + k);
}

Matrix prefix_sums(const Matrix& grads, std::size_t upto) {
  Matrix prefix = Matrix::Zero(grads.rows(), static_cast<Eigen::Index>(upto + 1));
  for (std::size_t i = 1; i <= upto; ++i) {
    prefix.col(static_cast<Eigen::Index>(i)) =
        prefix.col(static_cast<Eigen::Index>(i - 1)) + grads.col(static_cast<Eigen::Index>(i - 1));
  }
  return prefix;
}

bool degenerate(double sigma2, double mean_square) {
  return !(sigma2 > 1e-24 * mean_square) || !(sigma2 > 0.0);
}

} // namespace

void BootstrapConfig::validate() const {
  if (L < 1) {
    throw DomainError("bootstrap: L must be at least 1");
  }
  if (window && *window < 1) {
    throw DomainError("bootstrap: window N must be at least 1");
  }
  if (M_boot < 1) {
    throw DomainError("bootstrap: M_boot must be at least 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("bootstrap: alpha must lie in (0, 1)");
  }
  if (!(gamma >= 0.0 && gamma < 0.5)) {
    throw DomainError("bootstrap: gamma must lie in [0, 0.5)");
  }
  if (T_m < 1) {
    throw DomainError("bootstrap: T_m must be at least 1");
  }
}

Vector c1_vector(std::size_t m, std::size_t k, std::size_t l, const Matrix& grads,
                 const Matrix& B_m, double D_A) {
  if (l < 1) {
    throw DomainError("c1_vector: l must be at least 1");
  }
  if (static_cast<std::size_t>(grads.cols()) < m + k) {
    throw DomainError("c1_vector: gradients for indices 1..m+k are required");
  }
  const auto col = [&](std::size_t i) { return grads.col(static_cast<Eigen::Index>(i - 1)); };
  Vector sum = Vector::Zero(grads.rows());
  if (l <= k) {
    for (std::size_t i = m + 1; i <= m + l; ++i) {
      sum += col(i);
    }
  } else if (l < m + k) {
    for (std::size_t i = m + k - l + 1; i <= m + k; ++i) {
      sum += col(i);
    }
  } else {
    for (std::size_t i = 1; i <= m + k; ++i) {
      sum += col(i);
    }
    sum *= static_cast<double>(l) / static_cast<double>(m + k);
  }
  return B_m * sum / D_A;
}

double gamma_tilde(std::size_t m, std::size_t k, std::size_t l, double gamma,
                   std::span<const double> errors, const Matrix& grads, const Matrix& B_m,
                   double D_A) {
  if (errors.size() < m + l) {
    throw DomainError("gamma_tilde: need at least m + l errors");
  }
  double cusum = 0.0;
  for (std::size_t i = m + 1; i <= m + l; ++i) {
    cusum += errors[i - 1];
  }
  Vector u = Vector::Zero(grads.rows());
  for (std::size_t j = 1; j <= m; ++j) {
    u += grads.col(static_cast<Eigen::Index>(j - 1)) * errors[j - 1];
  }
  u /= static_cast<double>(m);
  const Vector c1 = c1_vector(m, k, l, grads, B_m, D_A);
  const Vector h = factor_B(B_m).solve(c1);
  return (cusum - u.dot(h)) / boundary_g(m, l, gamma);
}

std::vector<double> bootstrap_errors(std::span<const double> residuals_mk, std::size_t count,
                                     Rng& rng) {
  std::vector<double> out;
  if (count == 0) {
    return out;
  }
  if (residuals_mk.empty()) {
    throw EmptySample("bootstrap_errors: empty residual pool");
  }
  out.resize(count);
  std::uniform_int_distribution<std::size_t> pick(0, residuals_mk.size() - 1);
  for (auto& e : out) {
    e = residuals_mk[pick(rng)];
  }
  return out;
}

double sigma_star(std::size_t m, std::size_t q, std::span<const double> errors,
                  const Matrix& grads_hist, const Matrix& B_m) {
  if (m <= q) {
    throw DegenerateWindow("sigma_star: m must exceed q");
  }
  if (errors.size() < m || static_cast<std::size_t>(grads_hist.cols()) < m) {
    throw DomainError("sigma_star: need m errors and m gradients");
  }
  Vector u = Vector::Zero(grads_hist.rows());
  double mean_square = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    u += grads_hist.col(static_cast<Eigen::Index>(j)) * errors[j];
    mean_square += errors[j] * errors[j];
  }
  u /= static_cast<double>(m);
  mean_square /= static_cast<double>(m);
  Vector v = Vector::Zero(u.size());
  if (!u.isZero(0.0)) {
    v = factor_B(B_m).solve(u);
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = errors[i] - v.dot(grads_hist.col(static_cast<Eigen::Index>(i)));
    ss += d * d;
  }
  const double s2 = ss / static_cast<double>(m - q);
  if (degenerate(s2, mean_square)) {
    throw DegenerateBootstrap("sigma_star: bootstrap variance estimate is zero");
  }
  return s2;
}

BlockStatistic::BlockStatistic(std::size_t m, std::size_t k, std::size_t T_m, double gamma,
                               std::vector<double> residual_pool, Matrix grads, const Matrix& B_m,
                               double D_A)
    : m_(m), k_(k), T_m_(T_m), pool_(std::move(residual_pool)),
      q_(static_cast<std::size_t>(grads.rows())) {
  if (m_ <= q_) {
    throw DegenerateWindow("block statistic: m must exceed q");
  }
  if (T_m_ < 1) {
    throw DomainError("block statistic: T_m must be at least 1");
  }
  if (static_cast<std::size_t>(grads.cols()) < m_ + k_) {
    throw DomainError("block statistic: gradients for indices 1..m+k are required");
  }
  if (pool_.empty()) {
    throw EmptySample("block statistic: empty residual pool");
  }
  if (!(D_A > 0.0)) {
    throw DomainError("block statistic: D_A must be positive");
  }
  const auto llt = factor_B(B_m);
  hist_grads_ = grads.leftCols(static_cast<Eigen::Index>(m_));
  proj_ = llt.solve(hist_grads_);

  const Matrix prefix = prefix_sums(grads, m_ + k_);
  correction_.resize(static_cast<Eigen::Index>(q_), static_cast<Eigen::Index>(T_m_));
  boundary_.resize(T_m_);
  for (std::size_t l = 1; l <= T_m_; ++l) {
    const Vector c1 = B_m * regime_sum(m_, k_, l, prefix) / D_A;
    correction_.col(static_cast<Eigen::Index>(l - 1)) = llt.solve(c1);
    boundary_[l - 1] = boundary_g(m_, l, gamma);
  }
}

double BlockStatistic::evaluate(std::span<const double> errors) const {
  if (errors.size() < m_ + T_m_) {
    throw DomainError("block statistic: need m + T_m errors");
  }
  Vector u = Vector::Zero(static_cast<Eigen::Index>(q_));
  double mean_square = 0.0;
  for (std::size_t j = 0; j < m_; ++j) {
    u += hist_grads_.col(static_cast<Eigen::Index>(j)) * errors[j];
    mean_square += errors[j] * errors[j];
  }
  u /= static_cast<double>(m_);
  mean_square /= static_cast<double>(m_);

  double ss = 0.0;
  for (std::size_t i = 0; i < m_; ++i) {
    const double d = errors[i] - u.dot(proj_.col(static_cast<Eigen::Index>(i)));
    ss += d * d;
  }
  const double s2 = ss / static_cast<double>(m_ - q_);
  if (degenerate(s2, mean_square)) {
    throw DegenerateBootstrap("block statistic: bootstrap variance estimate is zero");
  }

  double cusum = 0.0;
  double sup = 0.0;
  for (std::size_t l = 1; l <= T_m_; ++l) {
    cusum += errors[m_ + l - 1];
    const double v =
        std::abs(cusum - u.dot(correction_.col(static_cast<Eigen::Index>(l - 1)))) / boundary_[l - 1];
    sup = std::max(sup, v);
  }
  return sup / std::sqrt(s2);
}

double BlockStatistic::sample(Rng& rng) const {
  const auto errors = bootstrap_errors(pool_, m_ + T_m_, rng);
  return evaluate(errors);
}

BlockStatistic make_block_statistic(std::span<const Observation> data_mk, const ModelSpec& model,
                                    const HistoricalFit& history, const HistoricalFit& fit_mk,
                                    std::size_t T_m, double gamma) {
  const std::size_t m = history.m;
  if (data_mk.size() < m) {
    throw DomainError("block statistic: fewer observations than the historical window");
  }
  const std::size_t k = data_mk.size() - m;
  Matrix grads(static_cast<Eigen::Index>(model.q), static_cast<Eigen::Index>(m + k));
  for (std::size_t i = 0; i < m + k; ++i) {
    grads.col(static_cast<Eigen::Index>(i)) = model.gradient(data_mk[i].x, fit_mk.beta_hat);
  }
  auto pool = residuals(data_mk, model, fit_mk.beta_hat);
  return BlockStatistic(m, k, T_m, gamma, std::move(pool), std::move(grads), history.B_m,
                        history.A_m.squaredNorm());
}

double sample_block_stat(const BlockStatistic& stat, Rng& rng) { return stat.sample(rng); }

std::vector<std::vector<double>> mix_block_samples(const std::vector<std::vector<double>>& V,
                                                   std::size_t n_targets,
                                                   std::optional<std::size_t> window,
                                                   std::uint64_t seed,
                                                   std::vector<std::vector<std::size_t>>* counts) {
  if (V.empty()) {
    throw EmptySample("mix_block_samples: no block samples");
  }
  const std::size_t M = V.front().size();
  for (const auto& v : V) {
    if (v.size() != M) {
      throw DomainError("mix_block_samples: ragged block samples");
    }
  }
  if (counts) {
    counts->assign(n_targets, std::vector<std::size_t>(V.size(), 0));
  }
  std::vector<std::vector<double>> W(n_targets, std::vector<double>(M));
  for (std::size_t b = 0; b < n_targets; ++b) {
    for (std::size_t r = 0; r < M; ++r) {
      std::size_t source = 0;
      if (window) {
        Rng rng = substream(seed, StreamTag::bootstrap_select, b, r);
        std::uniform_int_distribution<std::size_t> pick(0, *window - 1);
        const std::size_t lag = pick(rng);
        source = lag >= b ? 0 : b - lag;
      } else if (b > 0) {
        Rng rng = substream(seed, StreamTag::bootstrap_select, b, r);
        std::uniform_int_distribution<std::size_t> pick(0, b - 1);
        source = pick(rng);
      }
      if (source >= V.size()) {
        throw DomainError("mix_block_samples: block " + std::to_string(source) +
                          " has not been sampled");
      }
      W[b][r] = V[source][r];
      if (counts) {
        ++(*counts)[b][source];
      }
    }
  }
  return W;
}

std::vector<double> schedule_from_mixtures(const std::vector<std::vector<double>>& W,
                                           std::size_t L, std::size_t T_m, double alpha) {
  if (W.empty()) {
    throw EmptySample("schedule_from_mixtures: no mixtures");
  }
  if (L < 1) {
    throw DomainError("schedule_from_mixtures: L must be at least 1");
  }
  std::vector<double> by_block(W.size());
  for (std::size_t b = 0; b < W.size(); ++b) {
    by_block[b] = quantile(W[b], alpha);
  }
  // k = T_m (and the tail when L does not divide T_m) joins the last block.
  std::vector<double> c_k(T_m);
  for (std::size_t k = 1; k <= T_m; ++k) {
    c_k[k - 1] = by_block[std::min(k / L, W.size() - 1)];
  }
  return c_k;
}

namespace {

std::size_t target_blocks(const BootstrapConfig& config) {
  return (config.T_m + config.L - 1) / config.L;
}

// Blocks whose statistic must be sampled for the mixture targets.
std::size_t sampled_blocks(const BootstrapConfig& config) {
  const std::size_t J = target_blocks(config);
  if (config.window) {
    return J;
  }
  return std::max<std::size_t>(J - 1, 1);
}

} // namespace

std::size_t required_stream_length(const BootstrapConfig& config) {
  return (sampled_blocks(config) - 1) * config.L;
}

BootstrapCriticalValues critical_value_schedule(std::span<const Observation> data, std::size_t m,
                                                const ModelSpec& model,
                                                const BootstrapConfig& config,
                                                const HistoricalFit& history) {
  config.validate();
  if (history.m != m) {
    throw DomainError("critical_value_schedule: historical fit window differs from m");
  }
  if (m <= model.q) {
    throw DegenerateWindow("critical_value_schedule: m must exceed q");
  }
  const std::size_t n_blocks = sampled_blocks(config);
  const std::size_t needed = m + required_stream_length(config);
  if (data.size() < needed) {
    throw DomainError("critical_value_schedule: need " + std::to_string(needed) +
                      " observations, got " + std::to_string(data.size()));
  }

  BootstrapCriticalValues out;
  out.m = m;
  out.config = config;
  std::vector<std::vector<double>> V(n_blocks, std::vector<double>(config.M_boot));

  Vector warm = history.beta_hat;
  for (std::size_t j = 0; j < n_blocks; ++j) {
    const std::size_t k = j * config.L;
    const auto window = data.first(m + k);
    HistoricalFit fit_mk = history;
    if (k > 0) {
      FitOptions opts = config.refit;
      if (!opts.init) {
        opts.init = warm;
      }
      fit_mk = fit_nls(window, model, opts);
      warm = fit_mk.beta_hat;
    }
    const BlockStatistic stat =
        make_block_statistic(window, model, history, fit_mk, config.T_m, config.gamma);
    double mean = 0.0;
    for (std::size_t r = 0; r < config.M_boot; ++r) {
      Rng rng = substream(config.seed, StreamTag::bootstrap_draw, j, r);
      V[j][r] = stat.sample(rng);
      mean += V[j][r];
    }
    out.blocks.push_back(BlockDiagnostics{j, k, fit_mk.beta_hat,
                                          mean / static_cast<double>(config.M_boot),
                                          quantile(V[j], config.alpha)});
  }

  const std::size_t n_targets = target_blocks(config);
  const auto W = mix_block_samples(V, n_targets, config.window, config.seed, &out.selection_counts);
  out.c_k = schedule_from_mixtures(W, config.L, config.T_m, config.alpha);
  return out;
}

BootstrapCriticalValues critical_value_schedule(std::span<const Observation> data, std::size_t m,
                                                const ModelSpec& model,
                                                const BootstrapConfig& config) {
  if (data.size() < m) {
    throw DomainError("critical_value_schedule: fewer observations than m");
  }
  const HistoricalFit history = fit_nls(data.first(m), model, config.refit);
  return critical_value_schedule(data, m, model, config, history);
}

} // namespace seqbreak
