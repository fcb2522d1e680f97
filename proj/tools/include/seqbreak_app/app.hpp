#pragma once

#include "seqbreak/asymptotic.hpp"
#include "seqbreak/bootstrap.hpp"
#include "seqbreak/experiment.hpp"
#include "seqbreak/nls.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqbreak::app {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kNumeric = 3,
  kNoAlarm = 4,
};

/// Bad input from the user or from a file: exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// CSV with header x1,...,xp,y.
std::vector<Observation> read_csv(std::istream& in, std::size_t p);
std::vector<Observation> read_csv_file(const std::string& path, std::size_t p);
void write_csv(std::ostream& out, const std::vector<Observation>& data);
void write_csv_file(const std::string& path, const std::vector<Observation>& data);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// FNV-1a of the canonical (sorted-key, compact) dump of `config`.
std::string config_hash(const nlohmann::json& config);

nlohmann::json to_json(const CalibrationResult& r);
nlohmann::json to_json(const BootstrapCriticalValues& r);
nlohmann::json to_json(const ExperimentReport& r, bool with_runtime);

/// Seed from the flag, else from SEQBREAK_SEED; UsageError when neither is set.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag);

} // namespace seqbreak::app
