#include "hqclab/cli/config.hpp"
#include "hqclab/cli/experiments.hpp"
#include "hqclab/errors.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  using namespace hqclab::cli;
  CLI::App app{"Runs the multiscale experiments and writes CSV tables."};
  std::string experiment, config_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("experiment", experiment, "converge-1d | stochastic-2d | dynamics-1d | equivalence")
      ->required()
      ->check(CLI::IsMember(experiment_names()));
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--out", out, "CSV output path (overrides the config)");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ExperimentResult result;
  try {
    Config config = Config::load(config_path);
    if (seed) config.set("seed", std::to_string(*seed));
    if (threads) config.set("threads", std::to_string(*threads));
    if (!out.empty()) config.set("output", out);
    const std::string path = config.get_string("output", experiment + ".csv");
    result = run_experiment(experiment, config);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ConfigError("cannot write '" + path + "'");
    file << result.csv();
    std::cout << result.summary() << "csv: " << path << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const hqclab::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 1;
  }
  return result.solver_failure ? 1 : 0;
}
