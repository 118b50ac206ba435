#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rkhs_ode {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

/// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_clock_s = 0.0;
  std::string version = kArtifactVersion;
  std::vector<std::string> argv;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Runs `rkhs-ode <args...>` (args exclude the program name) and returns the
/// exit code. Errors go to `err`, progress and summaries to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rkhs_ode
