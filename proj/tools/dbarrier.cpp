// Command-line front end. Precedence: defaults < config file < DBARRIER_*
// environment variables < command-line flags.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dbarrier/cli/config.hpp"
#include "dbarrier/cli/report.hpp"
#include "dbarrier/cli/run.hpp"

namespace cli = dbarrier::cli;

int main(int argc, char** argv) {
  CLI::App app{"Digital double-barrier options over many barrier periods"};
  std::string config_path;
  cli::Overrides over;
  bool json = false;
  std::optional<std::string> command;
  std::optional<std::uint64_t> seed, paths;
  std::optional<std::uint32_t> steps;
  std::optional<int> kmax, nodes;

  app.add_option("--config", config_path, "contract file")->required()->envname("DBARRIER_CONFIG");
  app.add_option("--command", command, "price-digital | price-floor | price-corridor | verify")
      ->envname("DBARRIER_COMMAND");
  app.add_flag("--verify", over.verify, "add Monte Carlo cross-checks")->envname("DBARRIER_VERIFY");
  app.add_flag("--json", json, "machine-readable report")->envname("DBARRIER_JSON");
  app.add_option("--seed", seed, "Monte Carlo seed")->envname("DBARRIER_SEED");
  app.add_option("--paths", paths, "Monte Carlo paths")->envname("DBARRIER_PATHS");
  app.add_option("--steps", steps, "Monte Carlo steps per window")->envname("DBARRIER_STEPS");
  app.add_option("--kmax", kmax, "minimum number of sine modes")->envname("DBARRIER_KMAX");
  app.add_option("--nodes", nodes, "minimum quadrature nodes")->envname("DBARRIER_NODES");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kExitConfigError;
  }
  over.command = command;
  over.seed = seed;
  over.paths = paths;
  over.steps = steps;
  over.k_max = kmax;
  over.nodes = nodes;

  try {
    auto job = cli::load_job(config_path);
    cli::apply_overrides(job, over);
    const auto report = cli::run(job);
    if (json)
      std::cout << cli::to_json_text(report) << '\n';
    else
      cli::print_table(std::cout, report);
    return cli::exit_code(report);
  } catch (const dbarrier::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfigError;
  } catch (const dbarrier::Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == dbarrier::ErrorCode::invalid_parameter ||
                   e.code() == dbarrier::ErrorCode::invalid_schedule
               ? cli::kExitConfigError
               : cli::kExitNumericalFailure;
  }
}
