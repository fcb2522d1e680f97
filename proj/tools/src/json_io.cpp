#include "seqbreak_app/app.hpp"

#include "seqbreak/errors.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>

namespace seqbreak::app {

using nlohmann::json;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// nlohmann::json keeps object keys sorted, so dump() is already canonical.
std::string config_hash(const json& config) { return fnv1a_hex(config.dump()); }

namespace {

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v[i]);
  }
  return out;
}

} // namespace

json to_json(const CalibrationResult& r) {
  json horizon;
  if (const auto* closed = std::get_if<ClosedEndLimit>(&r.horizon)) {
    horizon = {{"type", "closed"}, {"T", closed->T}};
  } else {
    horizon = {{"type", "open"}};
  }
  return {{"gamma", r.gamma},   {"alpha", r.alpha},   {"D", r.D},
          {"horizon", horizon}, {"M", r.M},           {"n_grid", r.n_grid},
          {"seed", r.seed},     {"c_alpha", r.c_alpha}, {"standard_error", r.standard_error}};
}

json to_json(const BootstrapCriticalValues& r) {
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"block", b.block},
                      {"k", b.k},
                      {"beta", vector_json(b.beta)},
                      {"mean", b.mean},
                      {"upper_quantile", b.upper_quantile}});
  }
  return {{"m", r.m},
          {"T_m", r.config.T_m},
          {"L", r.config.L},
          {"N", r.config.window ? json(*r.config.window) : json(nullptr)},
          {"M", r.config.M_boot},
          {"alpha", r.config.alpha},
          {"gamma", r.config.gamma},
          {"seed", r.config.seed},
          {"c_k", r.c_k},
          {"blocks", blocks}};
}

json to_json(const ExperimentReport& r, bool with_runtime) {
  json out = {{"metric", r.metric},       {"fraction", r.fraction},
              {"reps", r.reps},           {"n_alarm", r.n_alarm},
              {"n_no_detect", r.n_no_detect}, {"n_failed", r.n_failed}};
  if (r.tau_summary) {
    const auto& t = *r.tau_summary;
    out["tau_summary"] = {
        {"min", t.min}, {"q2", t.q2}, {"mean", t.mean}, {"q3", t.q3}, {"max", t.max}};
  } else {
    out["tau_summary"] = nullptr;
  }
  json records = json::array();
  for (const auto& rec : r.records) {
    json j = {{"rep", rec.rep}, {"failed", rec.failed}, {"alarm", rec.alarm}};
    if (rec.failed) {
      j["error"] = rec.error;
    } else {
      j["tau"] = rec.tau ? json(*rec.tau) : json(nullptr);
      j["sigma_hat"] = rec.sigma_hat;
      j["beta_hat"] = vector_json(rec.beta_hat);
      j["z_max"] = rec.z_max;
    }
    records.push_back(std::move(j));
  }
  out["records"] = std::move(records);
  if (with_runtime) {
    out["runtime_seconds"] = r.runtime_seconds;
  }
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) {
    return *flag;
  }
  const char* env = std::getenv("SEQBREAK_SEED");
  if (env == nullptr || *env == '\0') {
    throw UsageError("no seed: pass --seed or set SEQBREAK_SEED");
  }
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-') {
    throw UsageError(std::string("SEQBREAK_SEED is not an unsigned integer: '") + env + "'");
  }
  return v;
}

} // namespace seqbreak::app
