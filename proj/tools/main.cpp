#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dynbn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dynbn: approximate Bayesian filtering on dynamic junction trees"};
  app.require_subcommand(1);

  // run
  dynbn::cli::RunConfig config;
  std::string diagnostics = "on", oracle_check = "off", error_policy = "abort";
  CLI::App* run = app.add_subcommand("run", "run a scenario and write result tables");
  run->add_option("--scenario", config.scenario_path, "scenario JSON file")->required();
  run->add_option("--out", config.out_dir, "output directory")->required();
  run->add_option("--diagnostics", diagnostics, "on|off (default on)")
      ->check(CLI::IsMember({"on", "off"}));
  run->add_option("--oracle-check", oracle_check, "on|off (default off)")
      ->check(CLI::IsMember({"on", "off"}));
  run->add_option("--grid-cap", config.grid_cap, "max quadrature grid points (>= 1024)");
  run->add_option("--error-policy", error_policy, "abort|skip (default abort)")
      ->check(CLI::IsMember({"abort", "skip"}));

  // verify
  std::string suite;
  CLI::App* verify = app.add_subcommand("verify", "run a built-in verification suite");
  verify->add_option("--suite", suite, "suite name")->required();

  // scenario-gen
  std::string template_name, gen_path;
  std::uint64_t seed = 0;
  CLI::App* gen = app.add_subcommand("scenario-gen", "write a synthetic scenario");
  gen->add_option("--template", template_name, "kalman-chain|dispersal-chain|growth")
      ->required();
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--scenario", gen_path, "output scenario path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems map to exit 2
  }

  if (run->parsed()) {
    config.diagnostics = diagnostics == "on";
    config.oracle_check = oracle_check == "on";
    config.error_policy = error_policy == "abort" ? dynbn::cli::RunConfig::Policy::Abort
                                                  : dynbn::cli::RunConfig::Policy::Skip;
    return dynbn::cli::cmd_run(config);
  }
  if (verify->parsed()) return dynbn::cli::cmd_verify(suite);
  if (gen->parsed()) return dynbn::cli::cmd_scenario_gen(template_name, seed, gen_path);
  return 2;
}
