#include "seqbreak_app/app.hpp"

#include "seqbreak/detector.hpp"
#include "seqbreak/errors.hpp"
#include "seqbreak/model.hpp"
#include "seqbreak/version.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace seqbreak::app {
namespace {

using nlohmann::json;

struct CalibrateArgs {
  std::string scheme = "asymptotic";
  std::string model = "growth";
  std::vector<double> beta0;
  double sigma2x = 1.0;
  std::optional<double> D;
  double gamma = 0.0;
  double alpha = 0.05;
  std::string horizon = "open";
  std::optional<double> T;
  std::optional<std::size_t> m;
  std::optional<std::size_t> T_m;
  std::optional<std::size_t> M;
  std::size_t n_grid = 8192;
  std::size_t quad_nodes = 64;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  // bootstrap only
  std::string history;
  std::string stream;
  std::size_t L = 1;
  std::optional<std::size_t> N;
  std::string out;
};

struct MonitorArgs {
  std::string model = "growth";
  std::string history;
  std::string stream;
  std::string critical;
  std::optional<double> gamma;
  std::optional<double> alpha;
  std::optional<std::string> scheme;
  std::optional<std::size_t> T_m;
};

struct SimulateArgs {
  std::string model = "growth";
  std::vector<double> beta0;
  std::vector<double> beta1;
  double sigma2eps = 0.5;
  double sigma2x = 1.0;
  std::size_t m = 100;
  std::size_t T_m = 200;
  std::optional<std::size_t> k0;
  double gamma = 0.0;
  double alpha = 0.05;
  std::size_t reps = 0;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string scheme = "asymptotic";
  std::optional<double> c;
  std::string c_horizon = "open";
  std::size_t M = 50000;
  std::size_t n_grid = 8192;
  std::size_t L = 1;
  std::optional<std::size_t> N;
  std::size_t M_boot = 1000;
  std::string out;
  std::string csv;
  std::optional<std::size_t> dump_rep;
  std::string dump_dir;
  bool timing = false;
};

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[i];
  }
  return out;
}

json to_array(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v[i]);
  }
  return out;
}

Vector beta_or_default(const std::vector<double>& flag, const std::string& model) {
  const Vector beta = flag.empty() ? default_beta0(model) : to_vector(flag);
  if (static_cast<std::size_t>(beta.size()) != model_by_name(model).q) {
    throw UsageError("beta for model '" + model + "' needs " +
                     std::to_string(model_by_name(model).q) + " entries");
  }
  return beta;
}

void check_gamma_alpha(double gamma, double alpha) {
  if (!(gamma >= 0.0 && gamma < 0.5)) {
    throw UsageError("--gamma must lie in [0, 0.5)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw UsageError("--alpha must lie in (0, 1)");
  }
}

void emit(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << '\n';
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw UsageError("cannot write '" + path + "'");
  }
  file << doc.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot open '" + path + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void stamp(json& doc, const json& config, std::uint64_t seed) {
  doc["config"] = config;
  doc["seed"] = seed;
  doc["config_hash"] = config_hash(config);
  doc["engine_version"] = kEngineVersion;
}

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string data_hash(const std::vector<Observation>& data) {
  std::ostringstream text;
  write_csv(text, data);
  return fnv1a_hex(text.str());
}

// --- calibrate -------------------------------------------------------------

int calibrate_asymptotic(const CalibrateArgs& a, std::ostream& out) {
  check_gamma_alpha(a.gamma, a.alpha);
  const std::uint64_t seed = resolve_seed(a.seed);

  LimitHorizon horizon = OpenEndLimit{};
  if (a.horizon == "closed") {
    double T = 0.0;
    if (a.T) {
      T = *a.T;
    } else if (a.m && a.T_m && *a.m > 0) {
      T = static_cast<double>(*a.T_m) / static_cast<double>(*a.m);
    } else {
      throw UsageError("--horizon closed needs --T or both --m and --Tm");
    }
    horizon = ClosedEndLimit{T};
  }

  json config = {{"command", "calibrate"},
                 {"scheme", "asymptotic"},
                 {"gamma", a.gamma},
                 {"alpha", a.alpha},
                 {"horizon", a.horizon},
                 {"M", a.M.value_or(50000)},
                 {"n_grid", a.n_grid},
                 {"seed", seed}};
  double D = 0.0;
  json moments = nullptr;
  if (a.D) {
    D = *a.D;
    config["D"] = D;
  } else {
    const ModelSpec model = model_by_name(a.model);
    const Vector beta0 = beta_or_default(a.beta0, a.model);
    const auto mom = gaussian_moments(model, GaussianRegressorLaw{a.sigma2x}, beta0, a.quad_nodes);
    D = mom.D;
    config["model"] = a.model;
    config["beta0"] = to_array(beta0);
    config["sigma2x"] = a.sigma2x;
    config["quad_nodes"] = a.quad_nodes;
    moments = {{"A", to_array(mom.A)}, {"D_A", mom.D_A}, {"cond_B", mom.cond_B}};
  }
  if (const auto* closed = std::get_if<ClosedEndLimit>(&horizon)) {
    config["T"] = closed->T;
  }
  if (a.m) {
    config["m"] = *a.m;
  }
  if (a.T_m) {
    config["T_m"] = *a.T_m;
  }

  const auto result =
      critical_value(a.gamma, a.alpha, D, horizon, a.M.value_or(50000), a.n_grid, seed, a.threads);
  json doc = to_json(result);
  doc["scheme"] = "asymptotic";
  doc["m"] = a.m ? json(*a.m) : json(nullptr);
  doc["T_m"] = a.T_m ? json(*a.T_m) : json(nullptr);
  doc["moments"] = moments;
  if (!a.D) {
    doc["model"] = a.model;
  }
  stamp(doc, config, seed);
  emit(doc, a.out, out);
  return kOk;
}

int calibrate_bootstrap(const CalibrateArgs& a, std::ostream& out) {
  check_gamma_alpha(a.gamma, a.alpha);
  const std::uint64_t seed = resolve_seed(a.seed);
  if (a.history.empty() || a.stream.empty()) {
    throw UsageError("--scheme bootstrap needs --history and --stream");
  }
  if (!a.T_m) {
    throw UsageError("--scheme bootstrap needs --Tm");
  }
  const ModelSpec model = model_by_name(a.model);
  auto data = read_csv_file(a.history, model.p);
  const std::size_t m = data.size();
  const auto stream = read_csv_file(a.stream, model.p);
  data.insert(data.end(), stream.begin(), stream.end());

  BootstrapConfig cfg;
  cfg.L = a.L;
  cfg.window = a.N;
  cfg.M_boot = a.M.value_or(1000);
  cfg.alpha = a.alpha;
  cfg.gamma = a.gamma;
  cfg.T_m = *a.T_m;
  cfg.seed = seed;
  const auto result = critical_value_schedule(data, m, model, cfg);

  const json config = {{"command", "calibrate"},
                       {"scheme", "bootstrap"},
                       {"model", a.model},
                       {"data_hash", data_hash(data)},
                       {"m", m},
                       {"T_m", cfg.T_m},
                       {"L", cfg.L},
                       {"N", cfg.window ? json(*cfg.window) : json(nullptr)},
                       {"M", cfg.M_boot},
                       {"gamma", cfg.gamma},
                       {"alpha", cfg.alpha},
                       {"seed", seed}};
  json doc = to_json(result);
  doc["scheme"] = "bootstrap";
  doc["model"] = a.model;
  stamp(doc, config, seed);
  emit(doc, a.out, out);
  return kOk;
}

// --- monitor ---------------------------------------------------------------

int monitor(const MonitorArgs& a, std::ostream& out) {
  const ModelSpec model = model_by_name(a.model);
  const json crit = read_json_file(a.critical);
  const auto history = read_csv_file(a.history, model.p);
  const auto stream = read_csv_file(a.stream, model.p);

  if (!crit.contains("scheme") || !crit["scheme"].is_string()) {
    throw UsageError("critical-value file has no 'scheme'");
  }
  const std::string scheme = crit["scheme"];
  if (a.scheme && *a.scheme != scheme) {
    throw UsageError("critical-value file was built for scheme '" + scheme + "', not '" +
                     *a.scheme + "'");
  }
  const auto num = [&](const char* key) -> double {
    if (!crit.contains(key) || !crit[key].is_number()) {
      throw UsageError(std::string("critical-value file has no numeric '") + key + "'");
    }
    return crit[key].get<double>();
  };
  const auto opt_size = [&](const char* key) -> std::optional<std::size_t> {
    if (!crit.contains(key) || crit[key].is_null()) {
      return std::nullopt;
    }
    if (!crit[key].is_number_unsigned()) {
      throw UsageError(std::string("critical-value file: '") + key + "' must be a count");
    }
    return crit[key].get<std::size_t>();
  };

  MonitorConfig cfg;
  cfg.gamma = num("gamma");
  cfg.alpha = num("alpha");
  if (a.gamma && *a.gamma != cfg.gamma) {
    throw UsageError("critical values were built for gamma = " + crit["gamma"].dump());
  }
  if (a.alpha && *a.alpha != cfg.alpha) {
    throw UsageError("critical values were built for alpha = " + crit["alpha"].dump());
  }
  if (const auto m = opt_size("m"); m && *m != history.size()) {
    throw UsageError("critical values were built for m = " + std::to_string(*m) +
                     ", history has " + std::to_string(history.size()) + " rows");
  }
  std::optional<std::size_t> T_m = opt_size("T_m");
  if (a.T_m) {
    if (T_m && *T_m != *a.T_m) {
      throw UsageError("critical values were built for T_m = " + std::to_string(*T_m));
    }
    T_m = a.T_m;
  }
  if (T_m) {
    cfg.horizon = ClosedEnd{*T_m};
  }
  if (scheme == "asymptotic") {
    cfg.scheme = AsymptoticScheme{num("c_alpha")};
  } else if (scheme == "bootstrap") {
    if (!crit.contains("c_k") || !crit["c_k"].is_array()) {
      throw UsageError("critical-value file has no 'c_k' array");
    }
    cfg.scheme = BootstrapScheme{crit["c_k"].get<std::vector<double>>()};
  } else {
    throw UsageError("unknown scheme '" + scheme + "'");
  }
  cfg.validate();
  if (T_m && stream.size() > *T_m) {
    throw UsageError("stream has " + std::to_string(stream.size()) +
                     " rows, more than the horizon T_m = " + std::to_string(*T_m));
  }

  const HistoricalFit fit = fit_nls(history, model);
  const double sigma_hat = std::sqrt(fit.sigma2_hat);
  if (!(sigma_hat > 0.0)) {
    throw SingularMoments("historical residual variance is zero");
  }
  const std::size_t m = history.size();

  json start = {{"event", "start"},
                {"m", m},
                {"scheme", scheme},
                {"gamma", cfg.gamma},
                {"alpha", cfg.alpha},
                {"T_m", T_m ? json(*T_m) : json(nullptr)},
                {"beta_hat", to_array(fit.beta_hat)},
                {"sigma_hat", sigma_hat},
                {"critical_hash", crit.contains("config_hash") ? crit["config_hash"] : json(nullptr)},
                {"seed", crit.contains("seed") ? crit["seed"] : json(nullptr)},
                {"engine_version", kEngineVersion}};
  out << start.dump() << '\n';

  DetectorState state;
  bool reported = false;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    state = step(state, residual(stream[i], model, fit.beta_hat), m, sigma_hat, cfg);
    out << json{{"event", "step"},
                {"k", state.k},
                {"gamma_stat", state.gamma_stat},
                {"z_running", state.z_running},
                {"alarm", state.alarm}}
               .dump()
        << '\n';
    if (state.alarm && !reported) {
      reported = true;
      out << json{{"event", "alarm"},
                  {"k", *state.tau_hat},
                  {"gamma_stat", state.gamma_stat},
                  {"threshold", threshold_at(cfg, *state.tau_hat)},
                  {"sigma_hat", sigma_hat},
                  {"ingestion_index", i}}
                 .dump()
          << '\n';
    }
  }
  out.flush();
  return state.alarm ? kOk : kNoAlarm;
}

// --- simulate --------------------------------------------------------------

int simulate(const SimulateArgs& a, std::ostream& out) {
  check_gamma_alpha(a.gamma, a.alpha);
  if (a.reps < 1) {
    throw UsageError("--reps must be at least 1");
  }
  const std::uint64_t seed = resolve_seed(a.seed);

  Scenario s;
  s.model = a.model;
  s.beta0 = beta_or_default(a.beta0, a.model);
  if (a.k0) {
    if (a.beta1.empty()) {
      throw UsageError("--k0 needs --beta1");
    }
    s.beta1 = beta_or_default(a.beta1, a.model);
  }
  s.sigma2_eps = a.sigma2eps;
  s.sigma2_x = a.sigma2x;
  s.m = a.m;
  s.T_m = a.T_m;
  s.k0 = a.k0;
  s.gamma = a.gamma;
  s.alpha = a.alpha;
  s.reps = a.reps;
  s.seed = seed;
  s.threads = a.threads;

  json config = {{"command", "simulate"},
                 {"model", a.model},
                 {"beta0", to_array(s.beta0)},
                 {"beta1", a.k0 ? to_array(s.beta1) : json(nullptr)},
                 {"sigma2_eps", s.sigma2_eps},
                 {"sigma2_x", s.sigma2_x},
                 {"m", s.m},
                 {"T_m", s.T_m},
                 {"k0", a.k0 ? json(*a.k0) : json(nullptr)},
                 {"gamma", s.gamma},
                 {"alpha", s.alpha},
                 {"reps", s.reps},
                 {"seed", seed},
                 {"scheme", a.scheme}};

  json calibration = nullptr;
  if (a.scheme == "asymptotic") {
    s.thresholds = AsymptoticPlan{a.c.value_or(1.0)};
    s.validate();
    double c = 0.0;
    if (a.c) {
      c = *a.c;
      config["c"] = c;
    } else {
      const ModelSpec model = model_by_name(a.model);
      const double D = gaussian_moments(model, GaussianRegressorLaw{s.sigma2_x}, s.beta0).D;
      LimitHorizon horizon = OpenEndLimit{};
      if (a.c_horizon == "closed") {
        horizon = ClosedEndLimit{static_cast<double>(s.T_m) / static_cast<double>(s.m)};
      }
      const auto cal = critical_value(s.gamma, s.alpha, D, horizon, a.M, a.n_grid, seed, a.threads);
      c = cal.c_alpha;
      calibration = to_json(cal);
      config["c_horizon"] = a.c_horizon;
      config["M"] = a.M;
      config["n_grid"] = a.n_grid;
    }
    s.thresholds = AsymptoticPlan{c};
  } else if (a.scheme == "bootstrap") {
    BootstrapPlan plan;
    plan.L = a.L;
    plan.window = a.N;
    plan.M_boot = a.M_boot;
    s.thresholds = plan;
    config["L"] = a.L;
    config["N"] = a.N ? json(*a.N) : json(nullptr);
    config["M_boot"] = a.M_boot;
  } else {
    throw UsageError("--scheme must be asymptotic or bootstrap");
  }
  s.validate();

  if (a.dump_rep) {
    if (a.dump_dir.empty()) {
      throw UsageError("--dump-rep needs --dump-dir");
    }
    std::filesystem::create_directories(a.dump_dir);
    const auto data = simulate_stream(s, *a.dump_rep);
    write_csv_file((std::filesystem::path(a.dump_dir) / "history.csv").string(), data.history);
    write_csv_file((std::filesystem::path(a.dump_dir) / "stream.csv").string(), data.stream);
  }

  const ExperimentReport report = s.k0 ? run_power_experiment(s) : run_size_experiment(s);
  json doc = to_json(report, a.timing);
  if (const auto* plan = std::get_if<AsymptoticPlan>(&s.thresholds)) {
    doc["c"] = plan->c;
  }
  doc["calibration"] = calibration;
  doc["gamma"] = s.gamma;
  doc["alpha"] = s.alpha;
  doc["m"] = s.m;
  doc["T_m"] = s.T_m;
  stamp(doc, config, seed);
  emit(doc, a.out, out);

  if (!a.csv.empty()) {
    std::ofstream csv(a.csv, std::ios::binary);
    if (!csv) {
      throw UsageError("cannot write '" + a.csv + "'");
    }
    csv << "gamma,alpha,m,T_m,metric,fraction,reps,n_alarm,n_no_detect,n_failed,"
           "tau_min,tau_q2,tau_mean,tau_q3,tau_max\n";
    csv << shortest(s.gamma) << ',' << shortest(s.alpha) << ',' << s.m << ',' << s.T_m << ','
        << report.metric << ',' << shortest(report.fraction) << ',' << report.reps << ','
        << report.n_alarm << ',' << report.n_no_detect << ',' << report.n_failed;
    if (report.tau_summary) {
      const auto& t = *report.tau_summary;
      for (double v : {t.min, t.q2, t.mean, t.q3, t.max}) {
        csv << ',' << shortest(v);
      }
    } else {
      csv << ",,,,,";
    }
    csv << '\n';
  }
  return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sequential monitoring of nonlinear regression models for parameter changes",
               "seqbreak"};
  app.require_subcommand(1);

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Compute critical values");
  cal->add_option("--scheme", ca.scheme)->check(CLI::IsMember({"asymptotic", "bootstrap"}));
  cal->add_option("--model", ca.model, "growth, compartmental or linear");
  cal->add_option("--beta0", ca.beta0, "Parameter, comma separated")->delimiter(',');
  cal->add_option("--sigma2x", ca.sigma2x, "Regressor variance");
  cal->add_option("--D", ca.D, "Use this D instead of computing it from the model");
  cal->add_option("--gamma", ca.gamma)->required();
  cal->add_option("--alpha", ca.alpha)->required();
  cal->add_option("--horizon", ca.horizon)->check(CLI::IsMember({"open", "closed"}));
  cal->add_option("--T", ca.T, "Closed-end limit T = T_m / m");
  cal->add_option("--m", ca.m);
  cal->add_option("--Tm", ca.T_m);
  cal->add_option("--M", ca.M, "Replications (asymptotic 50000, bootstrap 1000)");
  cal->add_option("--n-grid", ca.n_grid);
  cal->add_option("--quad-nodes", ca.quad_nodes);
  cal->add_option("--seed", ca.seed);
  cal->add_option("--threads", ca.threads);
  cal->add_option("--history", ca.history, "History CSV (bootstrap)");
  cal->add_option("--stream", ca.stream, "Stream prefix CSV (bootstrap)");
  cal->add_option("--L", ca.L, "Refresh period (bootstrap)");
  cal->add_option("--N", ca.N, "Mixture window (bootstrap); all blocks when omitted");
  cal->add_option("--out", ca.out, "Output file; stdout when omitted");

  MonitorArgs ma;
  auto* mon = app.add_subcommand("monitor", "Run the detector over a stream, one JSON line per row");
  mon->add_option("--model", ma.model);
  mon->add_option("--history", ma.history)->required();
  mon->add_option("--stream", ma.stream)->required();
  mon->add_option("--critical", ma.critical)->required();
  mon->add_option("--gamma", ma.gamma);
  mon->add_option("--alpha", ma.alpha);
  mon->add_option("--scheme", ma.scheme);
  mon->add_option("--Tm", ma.T_m);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo size or power experiment");
  sim->add_option("--model", sa.model);
  sim->add_option("--beta0", sa.beta0)->delimiter(',');
  sim->add_option("--beta1", sa.beta1)->delimiter(',');
  sim->add_option("--sigma2eps", sa.sigma2eps);
  sim->add_option("--sigma2x", sa.sigma2x);
  sim->add_option("--m", sa.m);
  sim->add_option("--Tm", sa.T_m);
  sim->add_option("--k0", sa.k0, "Last pre-change stream index; omit for a size run");
  sim->add_option("--gamma", sa.gamma);
  sim->add_option("--alpha", sa.alpha);
  sim->add_option("--reps", sa.reps)->required();
  sim->add_option("--seed", sa.seed);
  sim->add_option("--threads", sa.threads);
  sim->add_option("--scheme", sa.scheme)->check(CLI::IsMember({"asymptotic", "bootstrap"}));
  sim->add_option("--c", sa.c, "Fixed critical value; computed when omitted");
  sim->add_option("--c-horizon", sa.c_horizon)->check(CLI::IsMember({"open", "closed"}));
  sim->add_option("--M", sa.M);
  sim->add_option("--n-grid", sa.n_grid);
  sim->add_option("--L", sa.L);
  sim->add_option("--N", sa.N);
  sim->add_option("--M-boot", sa.M_boot);
  sim->add_option("--out", sa.out);
  sim->add_option("--csv", sa.csv);
  sim->add_option("--dump-rep", sa.dump_rep);
  sim->add_option("--dump-dir", sa.dump_dir);
  sim->add_flag("--timing", sa.timing, "Include the wall-clock runtime");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (cal->parsed()) {
      return ca.scheme == "bootstrap" ? calibrate_bootstrap(ca, out) : calibrate_asymptotic(ca, out);
    }
    if (mon->parsed()) {
      return monitor(ma, out);
    }
    return simulate(sa, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const EmptySample& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const DegenerateWindow& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const HorizonExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const Error& e) {
    // SingularMoments, NoConvergence, DegenerateBootstrap
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  }
}

} // namespace seqbreak::app
