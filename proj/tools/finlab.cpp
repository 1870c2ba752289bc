// finlab: config-driven experiment runner for conic pseudo-Finsler metrics
// and Zermelo navigation.
//
//   finlab validate <config.json>
//   finlab run <config.json> --out <dir> [--seed N] [--step h] [--fd]
//
// Exit codes: 0 all experiments pass (or config valid), 1 some experiment
// failed, 2 configuration or I/O error.

#include "finsler/experiments.hpp"
#include "finsler/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for conic pseudo-Finsler metrics and Zermelo navigation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  double step_override = 0.0;
  bool step_given = false;
  bool fd = false;

  CLI::App* validate = app.add_subcommand("validate", "check a scenario config");
  validate->add_option("config", config_path, "scenario JSON file")->required();

  CLI::App* run = app.add_subcommand("run", "run a scenario's experiments");
  run->add_option("config", config_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory for CSV reports");
  run->add_option("--seed", seed_override, "override the scenario seed")
      ->each([&](const std::string&) { seed_given = true; });
  run->add_option("--step", step_override, "override integration steps")
      ->each([&](const std::string&) { step_given = true; });
  run->add_flag("--fd", fd, "use the finite-difference oracle mode for tensor experiments");

  CLI11_PARSE(app, argc, argv);

  std::vector<std::string> errors;
  finsler::Scenario scenario = finsler::load_scenario_file(config_path, errors);
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
    return 2;
  }

  if (validate->parsed()) {
    std::cout << "OK\n";
    return 0;
  }

  finsler::RunOverrides overrides;
  if (seed_given) overrides.seed = seed_override;
  if (step_given) overrides.step = step_override;
  overrides.fd = fd;

  std::vector<finsler::ExperimentReport> reports;
  try {
    reports = finsler::run_scenario(scenario, overrides, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  int failed = 0;
  for (const auto& r : reports)
    if (!r.pass) ++failed;
  std::cout << (failed == 0 ? "ALL PASS" : "FAILURES: " + std::to_string(failed)) << " ("
            << reports.size() << " experiments)\n";
  return failed == 0 ? 0 : 1;
}
