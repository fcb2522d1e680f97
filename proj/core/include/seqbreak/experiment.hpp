#pragma once

#include "seqbreak/model.hpp"
#include "seqbreak/nls.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace seqbreak {

/// Fixed critical value c for every k.
struct AsymptoticPlan {
  double c = 0.0;
};

/// Per-replication bootstrap schedule built from that replication's data.
struct BootstrapPlan {
  std::size_t L = 1;
  std::optional<std::size_t> window;
  std::size_t M_boot = 1000;
  FitOptions refit;
};

using ThresholdPlan = std::variant<AsymptoticPlan, BootstrapPlan>;

struct Scenario {
  std::string model = "growth";
  Vector beta0;
  /// Post-change parameter, used only when k0 is set.
  Vector beta1;
  double sigma2_eps = 0.5;
  double sigma2_x = 1.0;
  std::size_t m = 100;
  std::size_t T_m = 200;
  /// Stream index of the last pre-change observation; empty under H0.
  std::optional<std::size_t> k0;
  double gamma = 0.0;
  double alpha = 0.05;
  ThresholdPlan thresholds = AsymptoticPlan{};
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Options for the historical fit of every replication.
  FitOptions fit;

  void validate() const;
};

struct SimulatedData {
  std::vector<Observation> history;
  std::vector<Observation> stream;
};

/// Replication `rep` of a scenario: m historical observations from beta0,
/// then T_m stream observations where index k uses beta0 for k <= k0 and
/// beta1 afterwards.
SimulatedData simulate_stream(const Scenario& scenario, std::size_t rep);

struct TauSummary {
  double min = 0.0;
  double q2 = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
  double max = 0.0;

  bool operator==(const TauSummary&) const = default;
};

/// Five-number summary with lower interpolation: q = sorted[floor((n - 1) p)].
TauSummary summarize_tau(std::span<const std::size_t> taus);

struct RepRecord {
  std::size_t rep = 0;
  bool failed = false;
  std::string error;
  bool alarm = false;
  std::optional<std::size_t> tau;
  double sigma_hat = 0.0;
  Vector beta_hat;
  /// Largest normalised statistic seen over the stream.
  double z_max = 0.0;
};

struct ExperimentReport {
  std::string metric;  // "size" or "power"
  double fraction = 0.0;
  std::size_t reps = 0;
  std::size_t n_alarm = 0;
  std::size_t n_no_detect = 0;
  std::size_t n_failed = 0;
  std::optional<TauSummary> tau_summary;
  double runtime_seconds = 0.0;
  std::vector<RepRecord> records;
};

/// Equality of everything except the wall-clock runtime.
bool same_outcome(const ExperimentReport& a, const ExperimentReport& b);

/// Runs one replication; numeric failures are captured in the record.
RepRecord run_replication(const Scenario& scenario, std::size_t rep);

/// Alarm fraction under H0. Replications whose fit fails are excluded from
/// the denominator and counted in n_failed.
ExperimentReport run_size_experiment(const Scenario& scenario);

/// Alarm fraction and stopping-time summary under a change at k0.
ExperimentReport run_power_experiment(const Scenario& scenario);

} // namespace seqbreak
