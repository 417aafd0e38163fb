#pragma once

// Experiment commands behind the riccati-geo executable. Everything here talks
// to the numerical core through the C API only.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace riccati_geo::cli {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitNumeric = 3 };

/// Bad configuration or command-line usage (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The numerical core failed (exit code 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunContext {
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;  ///< overrides the config's seed
  unsigned threads = 1;
  std::string config_name = "config";  ///< used in error messages
  std::ostream* log = nullptr;         ///< human-readable progress; may be null
};

struct CompareTiming {
  long n;
  long r;
  double full_step_seconds;
  double lowrank_step_seconds;
  double ratio;  ///< full / low-rank
};

struct CompareResult {
  std::vector<CompareTiming> timings;
  bool ratio_increasing;
};

std::vector<std::string> subcommands();

/// Runs a subcommand on a parsed config, writing its files under
/// ctx.out_dir. Returns the exit code; throws ConfigError / NumericError.
int run_subcommand(const std::string& name, const nlohmann::json& config, const RunContext& ctx);

/// The `compare` experiment (also used directly by the acceptance suite).
CompareResult run_compare(const nlohmann::json& config, const RunContext& ctx);

/// RICCATI_GEO_THREADS if set (must be a positive integer), otherwise the
/// available hardware parallelism.
unsigned thread_cap();

/// Full command-line entry point.
int main_entry(int argc, char** argv);

}  // namespace riccati_geo::cli
