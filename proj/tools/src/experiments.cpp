#include "hqclab/cli/experiments.hpp"

#include "hqclab/atomistic.hpp"
#include "hqclab/dynamics.hpp"
#include "hqclab/errors.hpp"
#include "hqclab/fem.hpp"
#include "hqclab/hqc.hpp"
#include "hqclab/mqc.hpp"
#include "hqclab/potential.hpp"
#include "hqclab/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

namespace hqclab::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
  return s;
}

std::string fmt(double x) { return format_double(x); }
std::string fmt(long x) { return std::to_string(x); }

const std::set<std::string> kCommonKeys{"seed", "threads", "tol", "output"};

std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(kCommonKeys.begin(), kCommonKeys.end());
  return keys;
}

CommonOptions read_common(const Config& c) {
  CommonOptions o;
  o.seed = c.get_u64("seed", o.seed);
  o.threads = static_cast<int>(c.get_int("threads", o.threads));
  o.tol = c.get_double("tol", o.tol);
  o.output = c.get_string("output", o.output);
  if (o.threads < 1) throw ConfigError("threads must be at least 1");
  if (!(o.tol > 0.0)) throw ConfigError("tol must be positive");
  return o;
}

long cells_from_eps(double eps) {
  if (!(eps > 0.0) || eps > 1.0) throw ConfigError("eps must lie in (0, 1]");
  const long n = std::lround(1.0 / eps);
  if (std::abs(double(n) * eps - 1.0) > 1e-12) throw ConfigError("1/eps must be an integer");
  return n;
}

void check_mesh_sizes(const std::vector<long>& sizes, long cells) {
  if (sizes.empty()) throw ConfigError("mesh_sizes must not be empty");
  for (long s : sizes)
    if (s < 1 || cells % s != 0)
      throw ConfigError("mesh size " + std::to_string(s) + " does not divide " + std::to_string(cells));
}

void check_window(int begin, int end, std::size_t count, const std::string& what) {
  if (begin < 0 || end < begin || std::size_t(end) >= count)
    throw ConfigError(what + " fit window [" + std::to_string(begin) + ", " + std::to_string(end) +
                      "] outside the " + std::to_string(count) + " mesh sizes");
}

Check range_check(const std::string& name, double value, double lo, double hi) {
  Check c;
  c.name = name;
  c.pass = value >= lo && value <= hi;
  c.detail = format_double(value) + " in [" + format_double(lo) + ", " + format_double(hi) + "]";
  return c;
}

Check bound_check(const std::string& name, double value, double bound) {
  Check c;
  c.name = name;
  c.pass = value <= bound;
  c.detail = format_double(value) + " <= " + format_double(bound);
  return c;
}

bool converged(const NewtonReport& r) { return r.converged; }

LoadMode load_mode(const std::string& name) {
  if (name == "lattice") return LoadMode::Lattice;
  if (name == "representative") return LoadMode::Representative;
  if (name == "sampling") return LoadMode::SamplingDomain;
  throw ConfigError("load must be lattice, representative or sampling");
}

}  // namespace

double fit_slope(const std::vector<double>& h, const std::vector<double>& error, int begin, int end) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int i = std::max(begin, 0); i <= end && i < int(h.size()) && i < int(error.size()); ++i) {
    if (!std::isfinite(error[i]) || !(error[i] > 0.0) || !(h[i] > 0.0)) continue;
    const double x = std::log2(h[i]), y = std::log2(error[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return kNaN;
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return kNaN;
  return (n * sxy - sx * sy) / den;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string ExperimentResult::csv() const {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
  }
  return out;
}

std::string ExperimentResult::summary() const {
  std::ostringstream s;
  s << experiment << ": " << rows.size() << " rows" << (solver_failure ? " (solver failures recorded)" : "")
    << '\n';
  for (const auto& [k, v] : metrics) s << "  " << k << " = " << format_double(v) << '\n';
  for (const auto& c : checks) s << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << ": " << c.detail << '\n';
  return s.str();
}

bool ExperimentResult::all_checks_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

double ExperimentResult::metric(const std::string& key) const {
  auto it = metrics.find(key);
  return it == metrics.end() ? kNaN : it->second;
}

// ---------------------------------------------------------------------------
// converge-1d

Converge1dConfig Converge1dConfig::from(const Config& c) {
  c.require_known(with_common({"eps", "psi", "force_amplitude", "mesh_sizes", "fit_h1_begin", "fit_h1_end",
                               "fit_l2_begin", "fit_l2_end"}));
  Converge1dConfig k;
  k.common = read_common(c);
  k.eps = c.get_double("eps", k.eps);
  k.psi = c.get_doubles("psi", k.psi);
  k.force_amplitude = c.get_double("force_amplitude", k.force_amplitude);
  k.mesh_sizes = c.get_ints("mesh_sizes", k.mesh_sizes);
  k.fit_h1_begin = int(c.get_int("fit_h1_begin", k.fit_h1_begin));
  k.fit_h1_end = int(c.get_int("fit_h1_end", std::min<long>(k.fit_h1_end, long(k.mesh_sizes.size()) - 1)));
  k.fit_l2_begin = int(c.get_int("fit_l2_begin", k.fit_l2_begin));
  k.fit_l2_end = int(c.get_int("fit_l2_end", std::min<long>(k.fit_l2_end, long(k.mesh_sizes.size()) - 1)));
  for (double p : k.psi)
    if (!(p > 0.0)) throw ConfigError("psi entries must be positive");
  if (k.psi.size() > 64) throw ConfigError("at most 64 species");
  check_mesh_sizes(k.mesh_sizes, cells_from_eps(k.eps));
  check_window(k.fit_h1_begin, k.fit_h1_end, k.mesh_sizes.size(), "H1");
  check_window(k.fit_l2_begin, k.fit_l2_end, k.mesh_sizes.size(), "L2");
  return k;
}

ExperimentResult run_converge_1d(const Converge1dConfig& k) {
  const long cells = cells_from_eps(k.eps);
  check_mesh_sizes(k.mesh_sizes, cells);
  auto model = make_spring_chain(k.psi);
  auto lattice = std::make_shared<const Multilattice>(model->unit_cell(), cells, k.eps);

  LatticeField f(lattice);
  for (long s = 0; s < lattice->site_count(); ++s)
    f.at(s)[0] = k.force_amplitude * std::sin(2.0 * std::numbers::pi * lattice->position(s)[0]);
  f = project_zero_mean(f);

  ExperimentResult res;
  res.experiment = "converge-1d";
  res.header = {"h", "err_h1_uhc", "err_h1_uh", "err_l2_uh", "mesh_size", "eps", "psi", "force_amplitude",
                "tol", "status"};

  EquilibriumProblem problem(lattice, model, f);
  NewtonOptions nopt;
  nopt.tol = k.common.tol;
  EquilibriumResult exact{LatticeField(lattice), {}};
  try {
    exact = solve_equilibrium(problem, LatticeField(lattice), nopt);
  } catch (const SolverError&) {
    exact.report.converged = false;
  }
  if (!converged(exact.report)) {
    res.solver_failure = true;
    res.checks.push_back({"reference solve", false, "atomistic equilibrium did not converge"});
    return res;
  }
  const DiscreteNorms un = discrete_norms(exact.u);

  const std::size_t rows = k.mesh_sizes.size();
  std::vector<double> h(rows), e_h1c(rows, kNaN), e_h1(rows, kNaN), e_l2(rows, kNaN);
  std::vector<std::string> status(rows, "ok");
  parallel_for(long(rows), k.common.threads, [&](long i) {
    const long ne = k.mesh_sizes[i];
    h[i] = 1.0 / double(ne);
    try {
      auto mesh = build_mesh(1, ne);
      HqcOptions opt;
      opt.tol = k.common.tol;
      HqcSolver solver(model, lattice, mesh, opt);
      HqcSolution sol = solver.solve(f);
      if (!converged(sol.report)) {
        status[i] = "solver_failure";
        return;
      }
      const LatticeField uhc = solver.reconstruct(sol.u);
      const DiscreteNorms ec = lattice_error(exact.u, uhc);
      const DiscreteNorms eh = lattice_error(exact.u, sol.u);
      e_h1c[i] = ec.h1 / un.h1;
      e_h1[i] = eh.h1 / un.h1;
      e_l2[i] = eh.l2 / un.l2;
    } catch (const SolverError&) {
      status[i] = "solver_failure";
    }
  });

  for (std::size_t i = 0; i < rows; ++i) {
    res.rows.push_back({fmt(h[i]), fmt(e_h1c[i]), fmt(e_h1[i]), fmt(e_l2[i]), fmt(k.mesh_sizes[i]), fmt(k.eps),
                        join(k.psi), fmt(k.force_amplitude), fmt(k.common.tol), status[i]});
    if (status[i] != "ok") res.solver_failure = true;
  }

  const double s_h1c = fit_slope(h, e_h1c, k.fit_h1_begin, k.fit_h1_end);
  const double s_l2 = fit_slope(h, e_l2, k.fit_l2_begin, k.fit_l2_end);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double e : e_h1) {
    if (!std::isfinite(e)) continue;
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  const double ratio = hi > 0.0 ? hi / lo : kNaN;
  res.metrics["slope_h1_uhc"] = s_h1c;
  res.metrics["slope_l2_uh"] = s_l2;
  res.metrics["h1_uh_max_over_min"] = ratio;
  res.metrics["l2_uh_terminal"] = e_l2.back();
  res.checks.push_back(range_check("H1 slope of corrected solution", s_h1c, 0.85, 1.15));
  res.checks.push_back(range_check("L2 slope of macro solution", s_l2, 1.8, 2.2));
  res.checks.push_back(bound_check("terminal relative L2 error", e_l2.back(), 10.0 * k.eps));
  res.checks.push_back(bound_check("H1 error of macro solution, max/min", ratio, 3.0));
  return res;
}

// ---------------------------------------------------------------------------
// stochastic-2d

Stochastic2dConfig Stochastic2dConfig::from(const Config& c) {
  c.require_known(with_common({"n", "n_rep", "mesh_sizes", "fit_begin", "fit_end", "load"}));
  Stochastic2dConfig k;
  k.common = read_common(c);
  k.n = c.get_int("n", k.n);
  const bool custom_rep = c.has("n_rep");
  k.n_rep = c.get_ints("n_rep", k.n_rep);
  if (!custom_rep) k.n_rep = {8, 32, k.n};
  k.mesh_sizes = c.get_ints("mesh_sizes", k.mesh_sizes);
  k.fit_begin = int(c.get_int("fit_begin", k.fit_begin));
  k.fit_end = int(c.get_int("fit_end", std::min<long>(k.fit_end, long(k.mesh_sizes.size()) - 1)));
  k.load = c.get_string("load", k.load);
  load_mode(k.load);
  if (k.n < 2 || (k.n & (k.n - 1)) != 0) throw ConfigError("n must be a power of two");
  for (long r : k.n_rep)
    if (r < 1 || r > k.n) throw ConfigError("n_rep entries must lie in [1, n]");
  check_mesh_sizes(k.mesh_sizes, k.n);
  check_window(k.fit_begin, k.fit_end, k.mesh_sizes.size(), "energy");
  return k;
}

ExperimentResult run_stochastic_2d(const Stochastic2dConfig& k) {
  check_mesh_sizes(k.mesh_sizes, k.n);
  StochasticModel sm = make_stochastic_model(k.n, k.common.seed);

  ExperimentResult res;
  res.experiment = "stochastic-2d";
  res.header = {"h", "n_rep", "rel_err_hqc", "rel_err_affine", "mesh_size", "n", "seed", "load", "tol", "status"};

  EquilibriumProblem problem(sm.lattice, sm.model, sm.force);
  NewtonOptions nopt;
  nopt.tol = k.common.tol;
  double e_exact = kNaN;
  try {
    EquilibriumResult exact = solve_equilibrium(problem, LatticeField(sm.lattice), nopt);
    if (converged(exact.report)) e_exact = total_energy(problem, exact.u);
  } catch (const SolverError&) {
  }
  if (!std::isfinite(e_exact)) {
    res.solver_failure = true;
    res.checks.push_back({"reference solve", false, "atomistic equilibrium did not converge"});
    return res;
  }
  res.metrics["reference_energy"] = e_exact;

  const std::size_t nh = k.mesh_sizes.size(), nr = k.n_rep.size();
  std::vector<double> err_hqc(nh * nr, kNaN), err_ad(nh * nr, kNaN);
  std::vector<std::string> status(nh * nr, "ok");
  auto solve_energy = [&](long n_rep, long ne, bool relax) {
    HqcOptions opt;
    opt.tol = k.common.tol;
    opt.relax = relax;
    opt.load = load_mode(k.load);
    HqcSolver solver(sm.model, sm.lattice, build_mesh(2, ne), opt, n_rep);
    HqcSolution sol = solver.solve(sm.force);
    if (!converged(sol.report)) return kNaN;
    return solver.energy();
  };
  parallel_for(long(nh * nr), k.common.threads, [&](long idx) {
    const long n_rep = k.n_rep[idx / nh];
    const long ne = k.mesh_sizes[idx % nh];
    try {
      const double eh = solve_energy(n_rep, ne, true);
      const double ea = solve_energy(n_rep, ne, false);
      err_hqc[idx] = std::abs(eh - e_exact) / std::abs(e_exact);
      err_ad[idx] = std::abs(ea - e_exact) / std::abs(e_exact);
      if (!std::isfinite(eh) || !std::isfinite(ea)) status[idx] = "solver_failure";
    } catch (const SolverError&) {
      status[idx] = "solver_failure";
    }
  });

  std::vector<double> h(nh);
  for (std::size_t j = 0; j < nh; ++j) h[j] = 1.0 / double(k.mesh_sizes[j]);
  for (std::size_t idx = 0; idx < nh * nr; ++idx) {
    const std::size_t j = idx % nh;
    res.rows.push_back({fmt(h[j]), fmt(k.n_rep[idx / nh]), fmt(err_hqc[idx]), fmt(err_ad[idx]),
                        fmt(k.mesh_sizes[j]), fmt(k.n), std::to_string(k.common.seed), k.load, fmt(k.common.tol),
                        status[idx]});
    if (status[idx] != "ok") res.solver_failure = true;
  }

  auto curve = [&](const std::vector<double>& v, std::size_t r) {
    return std::vector<double>(v.begin() + long(r * nh), v.begin() + long((r + 1) * nh));
  };
  const auto full = std::find(k.n_rep.begin(), k.n_rep.end(), k.n);
  if (full == k.n_rep.end()) {
    res.checks.push_back({"full sampling domain", false, "n_rep does not include n"});
    return res;
  }
  const std::size_t rf = std::size_t(full - k.n_rep.begin());
  const auto hqc_full = curve(err_hqc, rf), ad_full = curve(err_ad, rf);
  const double slope = fit_slope(h, hqc_full, k.fit_begin, k.fit_end);
  const double ad_min = *std::min_element(ad_full.begin(), ad_full.end());
  res.metrics["slope_hqc_full"] = slope;
  res.metrics["affine_min_over_coarsest"] = ad_min / ad_full.front();
  res.checks.push_back(range_check("HQC energy slope, full sampling domain", slope, 1.6, 2.4));
  Check ad{"affine closure does not converge", ad_min >= 0.5 * ad_full.front(),
           format_double(ad_min) + " >= 0.5 * " + format_double(ad_full.front())};
  if (std::isnan(ad_min)) ad.pass = false;
  res.checks.push_back(ad);
  for (std::size_t r = 0; r < nr; ++r) {
    if (r == rf) continue;
    const auto c = curve(err_hqc, r);
    const double floor = c.back();
    res.metrics["floor_n_rep_" + std::to_string(k.n_rep[r])] = floor;
    bool complete = std::all_of(c.begin(), c.end(), [](double e) { return std::isfinite(e); });
    Check fc{"n_rep " + std::to_string(k.n_rep[r]) + " completes above the full curve",
             complete && floor > hqc_full.back(),
             format_double(floor) + " > " + format_double(hqc_full.back())};
    res.checks.push_back(fc);
  }
  return res;
}

// ---------------------------------------------------------------------------
// dynamics-1d

Dynamics1dConfig Dynamics1dConfig::from(const Config& c) {
  c.require_known(with_common({"atoms", "t_final", "macro_tau_divisor", "atomistic_tau_divisor", "amplitude", "mesh_sizes", "fit_begin", "fit_end"}));
  Dynamics1dConfig k;
  k.common = read_common(c);
  k.atoms = c.get_int("atoms", k.atoms);
  k.t_final = c.get_double("t_final", k.t_final);
  k.macro_tau_divisor = c.get_double("macro_tau_divisor", k.macro_tau_divisor);
  k.atomistic_tau_divisor = c.get_double("atomistic_tau_divisor", k.atomistic_tau_divisor);
  k.amplitude = c.get_double("amplitude", k.amplitude);
  k.mesh_sizes = c.get_ints("mesh_sizes", k.mesh_sizes);
  k.fit_begin = int(c.get_int("fit_begin", k.fit_begin));
  k.fit_end = int(c.get_int("fit_end", std::min<long>(k.fit_end, long(k.mesh_sizes.size()) - 1)));
  if (k.atoms < 4 || k.atoms % 2 != 0) throw ConfigError("atoms must be an even number >= 4");
  if (!(k.t_final > 0.0)) throw ConfigError("t_final must be positive");
  if (!(k.macro_tau_divisor > 0.0) || !(k.atomistic_tau_divisor > 0.0))
    throw ConfigError("time step divisors must be positive");
  if (!(k.amplitude > 0.0)) throw ConfigError("amplitude must be positive");
  check_mesh_sizes(k.mesh_sizes, k.atoms / 2);
  check_window(k.fit_begin, k.fit_end, k.mesh_sizes.size(), "dynamics");
  return k;
}

namespace {

long step_count(double t_final, double tau) {
  const double s = t_final / tau;
  const long n = std::lround(s);
  if (n < 1 || std::abs(s - double(n)) > 1e-9 * s) throw ConfigError("t_final must be a multiple of the time step");
  return n;
}

}  // namespace

ExperimentResult run_dynamics_1d(const Dynamics1dConfig& k) {
  const long cells = k.atoms / 2;
  check_mesh_sizes(k.mesh_sizes, cells);
  const double eps = 1.0 / double(cells);
  const double tau_a = eps / k.atomistic_tau_divisor;
  step_count(k.t_final, tau_a);
  // Atomistic steps per macro step, for each mesh.
  std::vector<long> per_step;
  long stride = 0;
  for (long ne : k.mesh_sizes) {
    const double tau_h = 1.0 / (double(ne) * k.macro_tau_divisor);
    step_count(k.t_final, tau_h);
    try {
      per_step.push_back(step_count(tau_h, tau_a));
    } catch (const ConfigError&) {
      throw ConfigError("macro time step must be a multiple of the atomistic time step");
    }
    stride = std::gcd(stride, per_step.back());
  }

  DynamicsModel dm = make_dynamics_model();
  auto lattice = std::make_shared<const Multilattice>(dm.model->unit_cell(), cells, eps);
  EquilibriumProblem problem(lattice, dm.model);

  ExperimentResult res;
  res.experiment = "dynamics-1d";
  res.header = {"h", "linf_l2", "l2_h1", "mesh_size", "atoms", "t_final", "macro_tau_divisor", "atomistic_tau_divisor", "amplitude", "tol",
                "status"};

  std::optional<InitialCondition> init;
  AtomisticTrajectory ref;
  std::string ref_failure;
  try {
    init.emplace(initial_condition(problem, dm.species_masses, k.amplitude));
    ref = run_atomistic_dynamics(problem, dm.species_masses, init->u0, k.t_final, tau_a, stride);
  } catch (const SolverError& e) {
    ref_failure = e.what();
  }
  if (init) res.metrics["slowest_eigenvalue"] = init->eigenvalue;
  if (ref_failure.empty()) {
    const double e_eq = total_energy(problem, init->u_eq);
    double excitation_drift = 0.0;
    for (double H : ref.total_energy)
      excitation_drift = std::max(excitation_drift, std::abs(H - ref.total_energy.front()));
    excitation_drift /= std::abs(ref.total_energy.front() - e_eq);
    res.metrics["energy_drift"] = ref.max_energy_drift;
    res.metrics["energy_drift_over_excitation"] = excitation_drift;
    res.metrics["momentum_drift"] = ref.max_momentum_drift;
  }

  const std::size_t rows = k.mesh_sizes.size();
  std::vector<double> h(rows), linf(rows, kNaN), l2h1(rows, kNaN);
  std::vector<std::string> status(rows, "ok");
  parallel_for(long(rows), k.common.threads, [&](long i) {
    const long ne = k.mesh_sizes[i];
    h[i] = 1.0 / double(ne);
    if (!ref_failure.empty()) {
      status[i] = "reference_failure";
      return;
    }
    try {
      auto mesh = build_mesh(1, ne);
      P1Field u0(mesh);
      for (long a = 0; a < ne; ++a) u0.at(a) = init->u0.at(lattice->site_index({a * (cells / ne), 0}, 0));
      HqcOptions opt;
      opt.tol = k.common.tol;
      HqcSolver solver(dm.model, lattice, mesh, opt);
      HqcTrajectory traj = run_hqc_dynamics(solver, dm.species_masses, u0, k.t_final,
                                            1.0 / (double(ne) * k.macro_tau_divisor), 1);
      const long every = per_step[i] / stride;
      std::vector<LatticeField> reference;
      for (std::size_t s = 0; s < traj.times.size(); ++s) reference.push_back(ref.samples[s * every]);
      const TrajectoryError err = trajectory_error(traj.times, reference, traj.reconstructed);
      linf[i] = err.linf_l2;
      l2h1[i] = err.l2_h1;
    } catch (const SolverError&) {
      status[i] = "solver_failure";
    }
  });

  for (std::size_t i = 0; i < rows; ++i) {
    res.rows.push_back({fmt(h[i]), fmt(linf[i]), fmt(l2h1[i]), fmt(k.mesh_sizes[i]), fmt(k.atoms), fmt(k.t_final),
                        fmt(k.macro_tau_divisor), fmt(k.atomistic_tau_divisor), fmt(k.amplitude), fmt(k.common.tol), status[i]});
    if (status[i] != "ok") res.solver_failure = true;
  }
  const double s_l2 = fit_slope(h, linf, k.fit_begin, k.fit_end);
  const double s_h1 = fit_slope(h, l2h1, k.fit_begin, k.fit_end);
  res.metrics["slope_linf_l2"] = s_l2;
  res.metrics["slope_l2_h1"] = s_h1;
  res.checks.push_back(range_check("Linf-L2 slope over coarse h", s_l2, 1.6, 2.4));
  res.checks.push_back(range_check("L2-H1 slope over coarse h", s_h1, 0.7, 1.3));
  if (ref_failure.empty()) {
    res.checks.push_back(bound_check("reference total energy drift", ref.max_energy_drift, 1e-4));
  } else {
    res.solver_failure = true;
    res.checks.push_back({"reference total energy drift", false, "reference trajectory failed: " + ref_failure});
  }
  return res;
}

// ---------------------------------------------------------------------------
// equivalence

EquivalenceConfig EquivalenceConfig::from(const Config& c) {
  c.require_known(with_common({"trials", "eps", "mesh_size", "linear_amplitude", "lj_amplitude", "tol_linear",
                               "tol_lj", "tol_simple"}));
  EquivalenceConfig k;
  k.common = read_common(c);
  k.trials = c.get_int("trials", k.trials);
  k.eps = c.get_double("eps", k.eps);
  k.mesh_size = c.get_int("mesh_size", k.mesh_size);
  k.linear_amplitude = c.get_double("linear_amplitude", k.linear_amplitude);
  k.lj_amplitude = c.get_double("lj_amplitude", k.lj_amplitude);
  k.tol_linear = c.get_double("tol_linear", k.tol_linear);
  k.tol_lj = c.get_double("tol_lj", k.tol_lj);
  k.tol_simple = c.get_double("tol_simple", k.tol_simple);
  if (k.trials < 1) throw ConfigError("trials must be positive");
  check_mesh_sizes({k.mesh_size}, cells_from_eps(k.eps));
  if (!(k.linear_amplitude > 0.0) || !(k.lj_amplitude > 0.0)) throw ConfigError("amplitudes must be positive");
  if (!(k.tol_linear > 0.0) || !(k.tol_lj > 0.0) || !(k.tol_simple > 0.0))
    throw ConfigError("tolerances must be positive");
  return k;
}

namespace {

struct TrialModel {
  std::string kind;
  std::shared_ptr<const CrystalModel> model;
  std::vector<double> params;
};

/// Trial t cycles through linear m = 2, 3, 4, LJ m = 2, 3 and linear m = 1.
TrialModel trial_model(long trial, std::mt19937_64& rng) {
  auto uniform = [&](double a, double b) { return a + (b - a) * unit_double(rng()); };
  TrialModel t;
  const int kind = int(trial % 6);
  if (kind <= 2 || kind == 5) {
    const int m = kind == 5 ? 1 : kind + 2;
    for (int a = 0; a < m; ++a) t.params.push_back(uniform(0.5, 5.0));
    t.kind = "linear";
    t.model = make_spring_chain(t.params);
    return t;
  }
  t.kind = "lj";
  if (kind == 3) {
    const std::vector<LennardJonesLaw> base{{1.6, 0.99, 0.5}, {0.4, 1.01, 0.5}};
    std::vector<LennardJonesLaw> laws;
    for (auto law : base) {
      law.s *= uniform(0.8, 1.2);
      t.params.push_back(law.s);
      laws.push_back(law);
    }
    t.model = make_lennard_jones_model(UnitCell(1, {Vec::Constant(1, 0.0), Vec::Constant(1, 0.4)}), 2.0, laws);
  } else {
    const double unit = 1.0 / 3.0;
    const std::vector<LennardJonesLaw> base{{1.0, 0.98, unit}, {0.7, 1.02, unit}, {1.3, 1.0, unit}};
    std::vector<LennardJonesLaw> laws;
    for (auto law : base) {
      law.s *= uniform(0.8, 1.2);
      t.params.push_back(law.s);
      laws.push_back(law);
    }
    t.model = make_lennard_jones_model(
        UnitCell(1, {Vec::Constant(1, 0.0), Vec::Constant(1, 0.3), Vec::Constant(1, 0.65)}), 2.0, laws);
  }
  return t;
}

}  // namespace

ExperimentResult run_equivalence(const EquivalenceConfig& k) {
  const long cells = cells_from_eps(k.eps);
  check_mesh_sizes({k.mesh_size}, cells);
  ExperimentResult res;
  res.experiment = "equivalence";
  res.header = {"trial", "model", "m", "e_hqc", "e_hom", "e_mqc", "max_gap", "tolerance", "pass", "seed", "eps",
                "mesh_size", "amplitude", "params", "status"};

  const long n = k.trials;
  std::vector<std::vector<std::string>> rows(n);
  std::vector<double> rel_gap(n, kNaN);
  std::vector<std::string> kinds(n);
  std::vector<int> species(n);
  std::vector<bool> pass(n, false), failed(n, false);
  parallel_for(n, k.common.threads, [&](long t) {
    std::mt19937_64 rng(k.common.seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(t));
    TrialModel tm = trial_model(t, rng);
    const int m = tm.model->unit_cell().species_count();
    const double amp = tm.kind == "lj" ? k.lj_amplitude : k.linear_amplitude;
    auto lattice = std::make_shared<const Multilattice>(tm.model->unit_cell(), cells, k.eps);
    auto mesh = build_mesh(1, k.mesh_size);
    P1Field u(mesh);
    for (long a = 0; a < k.mesh_size; ++a) u.at(a)[0] = amp * (2.0 * unit_double(rng()) - 1.0);
    u = project_zero_mean(u);
    const EquivalenceReport r = equivalence_report(tm.model, lattice, mesh, u);
    const double tol = (m == 1 ? k.tol_simple : tm.kind == "lj" ? k.tol_lj : k.tol_linear) * (1.0 + std::abs(r.e_hqc));
    failed[t] = !(r.hqc_ok && r.hom_ok && r.mqc_ok);
    pass[t] = !failed[t] && r.max_gap <= tol;
    rel_gap[t] = r.max_gap / (1.0 + std::abs(r.e_hqc));
    kinds[t] = m == 1 ? "simple" : tm.kind;
    species[t] = m;
    rows[t] = {fmt(t), tm.kind, fmt(long(m)), fmt(r.e_hqc), fmt(r.e_hom), fmt(r.e_mqc), fmt(r.max_gap), fmt(tol),
               pass[t] ? "1" : "0", std::to_string(k.common.seed), fmt(k.eps), fmt(k.mesh_size), fmt(amp),
               join(tm.params), failed[t] ? "solver_failure" : "ok"};
  });
  res.rows = std::move(rows);

  std::map<std::string, double> worst;
  long passed = 0;
  for (long t = 0; t < n; ++t) {
    if (failed[t]) res.solver_failure = true;
    if (pass[t]) ++passed;
    double& w = worst[kinds[t]];
    w = std::max(w, std::isnan(rel_gap[t]) ? std::numeric_limits<double>::infinity() : rel_gap[t]);
  }
  for (const auto& [kind, w] : worst) res.metrics["max_relative_gap_" + kind] = w;
  res.metrics["trials_passed"] = double(passed);
  res.checks.push_back({"all energy gaps within tolerance", passed == n,
                        std::to_string(passed) + " of " + std::to_string(n) + " trials"});
  return res;
}

// ---------------------------------------------------------------------------

std::vector<std::string> experiment_names() { return {"converge-1d", "stochastic-2d", "dynamics-1d", "equivalence"}; }

ExperimentResult run_experiment(const std::string& name, const Config& config) {
  if (name == "converge-1d") return run_converge_1d(Converge1dConfig::from(config));
  if (name == "stochastic-2d") return run_stochastic_2d(Stochastic2dConfig::from(config));
  if (name == "dynamics-1d") return run_dynamics_1d(Dynamics1dConfig::from(config));
  if (name == "equivalence") return run_equivalence(EquivalenceConfig::from(config));
  throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace hqclab::cli
