#include "seqbreak/experiment.hpp"

#include "seqbreak/bootstrap.hpp"
#include "seqbreak/detector.hpp"
#include "seqbreak/errors.hpp"
#include "seqbreak/random.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace seqbreak {
namespace {

constexpr std::uint64_t kBootstrapSeedSalt = 0x5eed'b007'0000'0001ULL;

Observation draw_observation(const ModelSpec& model, const Vector& beta, double sd_x, double sd_eps,
                             Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Observation obs;
  obs.x.resize(model.p);
  for (auto& v : obs.x) {
    v = sd_x * normal(rng);
  }
  const double eps = sd_eps * normal(rng);
  obs.y = model.value(obs.x, beta) + eps;
  return obs;
}

std::vector<double> bootstrap_thresholds(const Scenario& s, const BootstrapPlan& plan,
                                         const SimulatedData& data, const ModelSpec& model,
                                         const HistoricalFit& history, std::size_t rep) {
  BootstrapConfig cfg;
  cfg.L = plan.L;
  cfg.window = plan.window;
  cfg.M_boot = plan.M_boot;
  cfg.alpha = s.alpha;
  cfg.gamma = s.gamma;
  cfg.T_m = s.T_m;
  cfg.seed = mix64(s.seed ^ mix64(kBootstrapSeedSalt + rep));
  cfg.refit = plan.refit;
  std::vector<Observation> all = data.history;
  all.insert(all.end(), data.stream.begin(), data.stream.end());
  return critical_value_schedule(all, s.m, model, cfg, history).c_k;
}

ExperimentReport run_experiment(const Scenario& scenario, std::string metric) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.metric = std::move(metric);
  report.reps = scenario.reps;
  report.records.resize(scenario.reps);
  detail::parallel_for(scenario.reps, scenario.threads, [&](std::size_t r) {
    report.records[r] = run_replication(scenario, r);
  });

  std::vector<std::size_t> taus;
  for (const auto& rec : report.records) {
    if (rec.failed) {
      ++report.n_failed;
    } else if (rec.alarm) {
      ++report.n_alarm;
      taus.push_back(*rec.tau);
    } else {
      ++report.n_no_detect;
    }
  }
  const std::size_t used = report.reps - report.n_failed;
  report.fraction = used == 0 ? 0.0 : static_cast<double>(report.n_alarm) / static_cast<double>(used);
  if (!taus.empty()) {
    report.tau_summary = summarize_tau(taus);
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

bool same_vector(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

} // namespace

void Scenario::validate() const {
  const ModelSpec spec = model_by_name(model);
  if (static_cast<std::size_t>(beta0.size()) != spec.q) {
    throw DomainError("scenario: beta0 must have " + std::to_string(spec.q) + " entries");
  }
  if (k0) {
    if (static_cast<std::size_t>(beta1.size()) != spec.q) {
      throw DomainError("scenario: beta1 must have " + std::to_string(spec.q) + " entries");
    }
    if (*k0 < 1 || *k0 > T_m) {
      throw DomainError("scenario: k0 must lie in [1, T_m]");
    }
  }
  if (!(sigma2_eps >= 0.0) || !(sigma2_x > 0.0)) {
    throw DomainError("scenario: variances must be non-negative and sigma2_x positive");
  }
  if (m <= spec.q) {
    throw DegenerateWindow("scenario: m must exceed q");
  }
  if (T_m < 1) {
    throw DomainError("scenario: T_m must be at least 1");
  }
  if (!(gamma >= 0.0 && gamma < 0.5)) {
    throw DomainError("scenario: gamma must lie in [0, 0.5)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("scenario: alpha must lie in (0, 1)");
  }
  if (reps < 1) {
    throw DomainError("scenario: reps must be at least 1");
  }
  if (const auto* plan = std::get_if<AsymptoticPlan>(&thresholds)) {
    if (std::isnan(plan->c) || plan->c < 0.0) {
      throw DomainError("scenario: critical value must be non-negative");
    }
  } else {
    const auto& boot = std::get<BootstrapPlan>(thresholds);
    if (boot.L < 1 || boot.M_boot < 1 || (boot.window && *boot.window < 1)) {
      throw DomainError("scenario: bootstrap plan needs L, M_boot and N of at least 1");
    }
  }
  fit.validate();
}

SimulatedData simulate_stream(const Scenario& scenario, std::size_t rep) {
  scenario.validate();
  const ModelSpec model = model_by_name(scenario.model);
  Rng rng = substream(scenario.seed, StreamTag::scenario, rep);
  const double sd_x = std::sqrt(scenario.sigma2_x);
  const double sd_eps = std::sqrt(scenario.sigma2_eps);
  SimulatedData out;
  out.history.reserve(scenario.m);
  for (std::size_t i = 0; i < scenario.m; ++i) {
    out.history.push_back(draw_observation(model, scenario.beta0, sd_x, sd_eps, rng));
  }
  out.stream.reserve(scenario.T_m);
  for (std::size_t k = 1; k <= scenario.T_m; ++k) {
    const bool changed = scenario.k0 && k > *scenario.k0;
    out.stream.push_back(
        draw_observation(model, changed ? scenario.beta1 : scenario.beta0, sd_x, sd_eps, rng));
  }
  return out;
}

TauSummary summarize_tau(std::span<const std::size_t> taus) {
  if (taus.empty()) {
    throw EmptySample("summarize_tau: no detections");
  }
  std::vector<std::size_t> sorted(taus.begin(), taus.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto at = [&](double p) {
    return static_cast<double>(sorted[static_cast<std::size_t>(std::floor((n - 1) * p))]);
  };
  TauSummary s;
  s.min = static_cast<double>(sorted.front());
  s.max = static_cast<double>(sorted.back());
  s.q2 = at(0.5);
  s.q3 = at(0.75);
  long double total = 0;
  for (auto t : sorted) {
    total += t;
  }
  s.mean = std::clamp(static_cast<double>(total / n), s.min, s.max);
  return s;
}

RepRecord run_replication(const Scenario& scenario, std::size_t rep) {
  RepRecord rec;
  rec.rep = rep;
  try {
    const ModelSpec model = model_by_name(scenario.model);
    const SimulatedData data = simulate_stream(scenario, rep);
    const HistoricalFit history = fit_nls(data.history, model, scenario.fit);
    rec.beta_hat = history.beta_hat;
    rec.sigma_hat = std::sqrt(history.sigma2_hat);

    MonitorConfig cfg;
    cfg.gamma = scenario.gamma;
    cfg.alpha = scenario.alpha;
    cfg.horizon = ClosedEnd{scenario.T_m};
    if (const auto* plan = std::get_if<AsymptoticPlan>(&scenario.thresholds)) {
      cfg.scheme = AsymptoticScheme{plan->c};
    } else {
      cfg.scheme = BootstrapScheme{bootstrap_thresholds(
          scenario, std::get<BootstrapPlan>(scenario.thresholds), data, model, history, rep)};
    }

    DetectorState state;
    for (const auto& obs : data.stream) {
      state = step(state, residual(obs, model, history.beta_hat), scenario.m, rec.sigma_hat, cfg);
    }
    rec.alarm = state.alarm;
    rec.tau = state.tau_hat;
    rec.z_max = state.z_running;
  } catch (const Error& e) {
    rec = RepRecord{};
    rec.rep = rep;
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

ExperimentReport run_size_experiment(const Scenario& scenario) {
  scenario.validate();
  if (scenario.k0) {
    throw DomainError("size experiment: scenario must not contain a change");
  }
  return run_experiment(scenario, "size");
}

ExperimentReport run_power_experiment(const Scenario& scenario) {
  scenario.validate();
  if (!scenario.k0) {
    throw DomainError("power experiment: scenario needs k0");
  }
  return run_experiment(scenario, "power");
}

bool same_outcome(const ExperimentReport& a, const ExperimentReport& b) {
  if (a.metric != b.metric || a.fraction != b.fraction || a.reps != b.reps ||
      a.n_alarm != b.n_alarm || a.n_no_detect != b.n_no_detect || a.n_failed != b.n_failed ||
      a.tau_summary != b.tau_summary || a.records.size() != b.records.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.rep != y.rep || x.failed != y.failed || x.error != y.error || x.alarm != y.alarm ||
        x.tau != y.tau || x.sigma_hat != y.sigma_hat || x.z_max != y.z_max ||
        !same_vector(x.beta_hat, y.beta_hat)) {
      return false;
    }
  }
  return true;
}

} // namespace seqbreak
