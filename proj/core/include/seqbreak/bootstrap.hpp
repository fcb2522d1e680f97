#pragma once

#include "seqbreak/model.hpp"
#include "seqbreak/nls.hpp"
#include "seqbreak/random.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace seqbreak {

struct BootstrapConfig {
  /// Refresh period: one refit and one block statistic every L observations.
  std::size_t L = 1;
  /// Mixture window N. Empty selects the uniform mixture over all completed
  /// blocks 0..j-1; a value N mixes blocks max(j - i, 0), i = 0..N-1, with
  /// equal weights 1/N.
  std::optional<std::size_t> window;
  std::size_t M_boot = 2000;
  double alpha = 0.05;
  double gamma = 0.25;
  std::size_t T_m = 0;
  std::uint64_t seed = 0;
  /// Options for the block refits; left without `init`, each refit is
  /// warm-started from the previous block's estimate.
  FitOptions refit;

  void validate() const;
};

struct BlockDiagnostics {
  std::size_t block = 0;
  std::size_t k = 0;
  Vector beta;
  double mean = 0.0;
  double upper_quantile = 0.0;
};

struct BootstrapCriticalValues {
  std::size_t m = 0;
  BootstrapConfig config;
  /// c_k[k - 1] for k = 1..T_m, constant on each block.
  std::vector<double> c_k;
  std::vector<BlockDiagnostics> blocks;
  /// selection_counts[b][j]: how often block j was drawn into mixture b.
  std::vector<std::vector<std::size_t>> selection_counts;
};

/// D_A^-1 B_m [regime sum of gradients]; column i - 1 of `grads` holds
/// grad f(X_i) for i = 1..m+k.
Vector c1_vector(std::size_t m, std::size_t k, std::size_t l, const Matrix& grads,
                 const Matrix& B_m, double D_A);

/// [sum_{m+1}^{m+l} e_i - (m^-1 sum_{j<=m} grad_j^t e_j) B_m^-1 c1] / g(m, l, gamma).
double gamma_tilde(std::size_t m, std::size_t k, std::size_t l, double gamma,
                   std::span<const double> errors, const Matrix& grads, const Matrix& B_m,
                   double D_A);

/// `count` draws with replacement from `residuals_mk`.
std::vector<double> bootstrap_errors(std::span<const double> residuals_mk, std::size_t count,
                                     Rng& rng);

/// (m - q)^-1 sum_{i<=m} [e_i - (m^-1 sum_j grad_j^t e_j) B_m^-1 grad_i]^2.
/// Throws DegenerateBootstrap when the result vanishes.
double sigma_star(std::size_t m, std::size_t q, std::span<const double> errors,
                  const Matrix& grads_hist, const Matrix& B_m);

/// Precomputed block statistic sup_l |Gamma~(m, k, l, gamma)| / sigma*.
///
/// The regime sums of c1 come from prefix sums of the gradients, so one
/// draw costs O(m + T_m) regardless of the regime boundaries.
class BlockStatistic {
public:
  BlockStatistic(std::size_t m, std::size_t k, std::size_t T_m, double gamma,
                 std::vector<double> residual_pool, Matrix grads, const Matrix& B_m, double D_A);

  /// One realisation with fresh bootstrap errors.
  double sample(Rng& rng) const;

  /// The statistic for a given error vector of length >= m + T_m.
  double evaluate(std::span<const double> errors) const;

  std::size_t m() const noexcept { return m_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t T_m() const noexcept { return T_m_; }
  std::span<const double> residual_pool() const noexcept { return pool_; }

private:
  std::size_t m_;
  std::size_t k_;
  std::size_t T_m_;
  std::vector<double> pool_;
  Matrix hist_grads_;  // q x m, gradients of the first m observations
  Matrix proj_;        // q x m, B_m^-1 grad_i
  Matrix correction_;  // q x T_m, B_m^-1 c1(l)
  std::vector<double> boundary_;
  std::size_t q_;
};

/// Block statistic for block start k from the observations 1..m+k and a
/// fit on them. B_m and D_A = A_m^t A_m come from the historical fit.
BlockStatistic make_block_statistic(std::span<const Observation> data_mk, const ModelSpec& model,
                                    const HistoricalFit& history, const HistoricalFit& fit_mk,
                                    std::size_t T_m, double gamma);

double sample_block_stat(const BlockStatistic& stat, Rng& rng);

/// Mixture draws W[b][r] for targets b = 0..n_targets-1 from block draws V[j][r].
std::vector<std::vector<double>> mix_block_samples(
    const std::vector<std::vector<double>>& V, std::size_t n_targets,
    std::optional<std::size_t> window, std::uint64_t seed,
    std::vector<std::vector<std::size_t>>* counts = nullptr);

/// c_k for k = 1..T_m from the mixture samples of block min(floor(k / L), J - 1),
/// J = W.size().
std::vector<double> schedule_from_mixtures(const std::vector<std::vector<double>>& W,
                                           std::size_t L, std::size_t T_m, double alpha);

/// Number of stream observations after m that a schedule needs: (max(J - 1, 1) - 1) L
/// for the all-blocks mixture and (J - 1) L for the window rule, J = ceil(T_m / L).
std::size_t required_stream_length(const BootstrapConfig& config);

/// Per-observation bootstrap critical values. `data` holds the m historical
/// observations followed by at least required_stream_length(config) stream
/// observations.
BootstrapCriticalValues critical_value_schedule(std::span<const Observation> data, std::size_t m,
                                                const ModelSpec& model,
                                                const BootstrapConfig& config,
                                                const HistoricalFit& history);

BootstrapCriticalValues critical_value_schedule(std::span<const Observation> data, std::size_t m,
                                                const ModelSpec& model,
                                                const BootstrapConfig& config);

} // namespace seqbreak
