#ifndef DYNBN_CLI_HPP
#define DYNBN_CLI_HPP

#include <cstdint>
#include <string>

namespace dynbn::cli {

struct RunConfig {
  std::string scenario_path;
  std::string out_dir;
  bool diagnostics = true;
  bool oracle_check = false;
  int grid_cap = 1 << 18;  // quadrature points; must be >= 2^10
  enum class Policy { Abort, Skip } error_policy = Policy::Abort;
};

/// Runs a scenario and writes trajectory.csv, covariances.csv and (when
/// diagnostics are on) diagnostics.csv into the output directory.
/// Exit codes: 0 success, 2 validation failure, 3 runtime model mismatch.
int cmd_run(const RunConfig& config);

/// Runs a named verification suite, one pass/fail line per property.
/// Exit codes: 0 all pass, 1 failures, 2 unknown suite.
int cmd_verify(const std::string& suite);

/// Writes a deterministic synthetic scenario for the given template
/// (kalman-chain | dispersal-chain | growth) and seed.
/// Exit codes: 0 success, 2 unknown template or unwritable path.
int cmd_scenario_gen(const std::string& template_name, std::uint64_t seed,
                     const std::string& path);

}  // namespace dynbn::cli

#endif  // DYNBN_CLI_HPP
