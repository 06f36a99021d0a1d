#pragma once

#include "hqclab/cli/config.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hqclab::cli {

/// Least-squares slope of log2(error) against log2(h) over rows
/// [begin, end] (inclusive). Non-finite entries are skipped; NaN when fewer
/// than two points remain.
double fit_slope(const std::vector<double>& h, const std::vector<double>& error, int begin, int end);

/// Shortest round-trip decimal of a double (17 significant digits).
std::string format_double(double x);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, double> metrics;
  std::vector<Check> checks;
  /// Some row recorded a solver failure.
  bool solver_failure = false;

  std::string csv() const;
  std::string summary() const;
  bool all_checks_pass() const;
  double metric(const std::string& key) const;
};

struct CommonOptions {
  std::uint64_t seed = 1;
  int threads = 1;
  double tol = 1e-10;
  std::string output;
};

struct Converge1dConfig {
  CommonOptions common;
  double eps = 1.0 / 4096.0;
  std::vector<double> psi{1.0, 4.0};
  double force_amplitude = 1.0;
  std::vector<long> mesh_sizes{4, 8, 16, 32, 64};
  int fit_h1_begin = 0, fit_h1_end = 4;
  int fit_l2_begin = 0, fit_l2_end = 2;

  static Converge1dConfig from(const Config& config);
};

struct Stochastic2dConfig {
  CommonOptions common;
  long n = 128;
  std::vector<long> n_rep{8, 32, 128};
  std::vector<long> mesh_sizes{4, 8, 16, 32, 64};
  int fit_begin = 0, fit_end = 3;
  /// lattice | representative | sampling
  std::string load = "lattice";

  static Stochastic2dConfig from(const Config& config);
};

struct Dynamics1dConfig {
  CommonOptions common;
  long atoms = 1024;
  double t_final = 1.0 / 20.0;
  /// Time steps h / macro_tau_divisor and eps / atomistic_tau_divisor.
  double macro_tau_divisor = 20.0;
  double atomistic_tau_divisor = 20.0;
  double amplitude = 0.01;
  std::vector<long> mesh_sizes{4, 8, 16, 32, 64};
  int fit_begin = 0, fit_end = 2;

  static Dynamics1dConfig from(const Config& config);
};

struct EquivalenceConfig {
  CommonOptions common;
  long trials = 60;
  double eps = 1.0 / 64.0;
  long mesh_size = 8;
  double linear_amplitude = 0.05;
  double lj_amplitude = 0.002;
  double tol_linear = 1e-10;
  double tol_lj = 1e-9;
  double tol_simple = 1e-12;

  static EquivalenceConfig from(const Config& config);
};

ExperimentResult run_converge_1d(const Converge1dConfig& config);
ExperimentResult run_stochastic_2d(const Stochastic2dConfig& config);
ExperimentResult run_dynamics_1d(const Dynamics1dConfig& config);
ExperimentResult run_equivalence(const EquivalenceConfig& config);

/// Dispatches on the experiment name; throws ConfigError for unknown names.
ExperimentResult run_experiment(const std::string& name, const Config& config);
std::vector<std::string> experiment_names();

}  // namespace hqclab::cli
