#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapeinv/error.hpp"

namespace CLI {
class App;
}

namespace shapeinv::cli {

using Json = nlohmann::json;

/// Process exit statuses. Every library error code maps onto one of these.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kBadInput = 3,
  kBadCheckpoint = 4,
  kDiverged = 5,
  kNoCandidates = 6,
  kIo = 7,
  kCheckFailed = 8,
};

int exit_code_for(ErrorCode code);

/// One tunable of a subcommand. The flag is --key with '_' written as '-';
/// a config file uses the key itself. The default's JSON type fixes the
/// accepted type (unsigned integer, number, string, bool, array of strings).
struct Param {
  std::string key;
  Json fallback;
  std::string help;
  bool positional = false;
};

/// Registers parameters on a CLI11 subcommand and merges them as
/// flag > config file > default.
class ParamTable {
 public:
  ParamTable(CLI::App& app, std::vector<Param> params);

  /// `file` must be an object whose keys are all known. Throws ConfigError.
  Json resolve(const Json& file) const;
  const std::vector<Param>& params() const noexcept { return params_; }

 private:
  struct Slot;
  std::vector<Param> params_;
  std::vector<std::shared_ptr<Slot>> slots_;
};

/// Reads a JSON object from disk. Throws IoError / ConfigError.
Json load_config_file(const std::filesystem::path& path);

// Typed access to a resolved config; throws ConfigError on a missing key or
// wrong type.
std::string get_string(const Json& cfg, const std::string& key);
double get_double(const Json& cfg, const std::string& key);
std::size_t get_size(const Json& cfg, const std::string& key);
std::uint64_t get_u64(const Json& cfg, const std::string& key);
bool get_bool(const Json& cfg, const std::string& key);
std::vector<std::string> get_strings(const Json& cfg, const std::string& key);

/// Environment variable naming the default checkpoint directory.
inline constexpr const char* kCheckpointDirEnv = "SINV_CHECKPOINT_DIR";
inline constexpr const char* kCheckpointFile = "checkpoint.sinv";

/// Fraction of the leg points of a thin-legged chair with displaced legs
/// that each mask keeps. The input is the lower half of a chair with legs in
/// place, sampled twice as densely.
struct LegRetention {
  double k_mask = 0.0;
  double tau_mask = 0.0;
  double voxel_mask = 0.0;
  std::size_t leg_points = 0;
};
LegRetention chair_leg_retention(std::size_t points, double leg_offset, double leg_radius,
                                 std::size_t k, double tau,
                                 std::size_t resolution, std::uint64_t seed);

/// Parses and runs one command line; returns the exit status. Diagnostics
/// go to stderr, tables and reports to stdout.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace shapeinv::cli
