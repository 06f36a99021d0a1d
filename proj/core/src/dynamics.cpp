#include "hqclab/dynamics.hpp"

#include "hqclab/errors.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

namespace hqclab {

DynamicState make_state(Eigen::VectorXd u0, Eigen::VectorXd mass, const ForceEvaluator& force) {
  if (u0.size() != mass.size()) throw std::invalid_argument("one mass per unknown is required");
  if (mass.size() && mass.minCoeff() <= 0.0) throw std::invalid_argument("masses must be positive");
  DynamicState s;
  s.u = std::move(u0);
  s.v = Eigen::VectorXd::Zero(s.u.size());
  s.mass = std::move(mass);
  force(s.u, s.force);
  return s;
}

void verlet_step(DynamicState& s, const ForceEvaluator& force, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("time step must be positive");
  s.v += 0.5 * tau * s.force.cwiseQuotient(s.mass);
  s.u += tau * s.v;
  force(s.u, s.force);
  s.v += 0.5 * tau * s.force.cwiseQuotient(s.mass);
  s.t += tau;
}

double max_difference_quotient(const LatticeField& u) {
  const auto& L = u.lattice();
  const double inv = 1.0 / L.spacing();
  double m = 0.0;
  for (long s = 0; s < L.site_count(); ++s)
    for (const auto& r : L.unit_cell().norm_offsets(L.site_species(s)))
      m = std::max(m, ((u.at(L.neighbor(s, r)) - u.at(s)) * inv).lpNorm<Eigen::Infinity>());
  return m;
}

InitialCondition initial_condition(const EquilibriumProblem& problem, const std::vector<double>& species_masses,
                                   double amplitude) {
  auto eq = solve_equilibrium(problem, LatticeField(problem.lattice()));
  const Eigen::VectorXd M = site_masses(*problem.lattice(), species_masses);
  Eigenmode mode = slowest_eigenmode(problem, eq.u, M);
  const double scale = max_difference_quotient(mode.mode);
  if (!(scale > 0.0)) throw SolverError("slowest mode has no spatial variation");
  LatticeField u0 = eq.u;
  u0.values() += amplitude / scale * mode.mode.values();
  return {eq.u, mode.mode, u0, mode.eigenvalue};
}

namespace {

Eigen::VectorXd dof_masses(const Multilattice& L, const std::vector<double>& species_masses) {
  const Eigen::VectorXd m = site_masses(L, species_masses);
  Eigen::VectorXd out(L.dof_count());
  for (long s = 0; s < L.site_count(); ++s) out.segment(s * L.dim(), L.dim()).setConstant(m[s]);
  return out;
}

}  // namespace

AtomisticTrajectory run_atomistic_dynamics(const EquilibriumProblem& problem, const std::vector<double>& species_masses,
                                           const LatticeField& u0, double t_final, double tau, long sample_every) {
  if (!(t_final >= 0.0) || !(tau > 0.0) || sample_every < 1) throw std::invalid_argument("bad time stepping parameters");
  const auto& L = *problem.lattice();
  const auto& E = problem.energy();
  const double N = double(L.site_count());
  const int d = L.dim();
  const Mat F = Mat::Zero(d, d);
  Eigen::VectorXd grad;
  ForceEvaluator force = [&](const Eigen::VectorXd& u, Eigen::VectorXd& f) {
    if (!std::isfinite(E.gradient(u, F, grad))) throw SolverError("bond collapse during time stepping");
    f = -N * grad;
  };
  DynamicState s = make_state(u0.values(), dof_masses(L, species_masses), force);
  auto hamiltonian = [&] { return 0.5 * s.v.dot(s.mass.cwiseProduct(s.v)) / N + E.energy(s.u, F); };
  auto momentum = [&] {
    Vec p = Vec::Zero(d);
    for (long i = 0; i < L.site_count(); ++i) p += s.mass[i * d] * s.v.segment(i * d, d);
    return p;
  };
  const double h0 = hamiltonian();
  const Vec p0 = momentum();
  const long steps = std::lround(t_final / tau);
  if (std::abs(double(steps) * tau - t_final) > 1e-9 * std::max(1.0, t_final))
    throw std::invalid_argument("final time must be a multiple of the time step");

  AtomisticTrajectory out;
  auto record = [&] {
    out.times.push_back(s.t);
    out.samples.emplace_back(u0.lattice_ptr(), s.u);
    out.total_energy.push_back(hamiltonian());
  };
  record();
  for (long k = 1; k <= steps; ++k) {
    verlet_step(s, force, tau);
    s.t = double(k) * tau;
    const double h = hamiltonian();
    if (!std::isfinite(h) || std::abs(h - h0) > 1.0 + std::abs(h0))
      throw SolverError("energy blow-up at t = " + std::to_string(s.t));
    out.max_energy_drift = std::max(out.max_energy_drift, std::abs(h - h0) / std::abs(h0));
    out.max_momentum_drift = std::max(out.max_momentum_drift, (momentum() - p0).norm());
    if (k % sample_every == 0) record();
  }
  return out;
}

Eigen::VectorXd lumped_masses(const MacroMesh& mesh, double density) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.node_count());
  for (long t = 0; t < mesh.element_count(); ++t)
    for (int a = 0; a <= mesh.dim(); ++a) m[mesh.node(t, a)] += density * mesh.element_measure(t) / double(mesh.dim() + 1);
  return m;
}

HqcTrajectory run_hqc_dynamics(HqcSolver& solver, const std::vector<double>& species_masses, const P1Field& u0,
                               double t_final, double tau, long sample_every) {
  if (!(t_final >= 0.0) || !(tau > 0.0) || sample_every < 1) throw std::invalid_argument("bad time stepping parameters");
  const auto& mesh = solver.mesh_ptr();
  const int d = mesh->dim();
  double density = 0.0;
  for (double m : species_masses) density += m;
  density /= double(species_masses.size());
  const Eigen::VectorXd nodal = lumped_masses(*mesh, density);
  Eigen::VectorXd mass(nodal.size() * d);
  for (long k = 0; k < nodal.size(); ++k) mass.segment(k * d, d).setConstant(nodal[k]);

  ForceEvaluator force = [&](const Eigen::VectorXd& u, Eigen::VectorXd& f) {
    solver.update(P1Field(mesh, u));
    f = -solver.gradient();
  };
  solver.reset();
  DynamicState s = make_state(u0.values(), mass, force);
  const long steps = std::lround(t_final / tau);
  if (std::abs(double(steps) * tau - t_final) > 1e-9 * std::max(1.0, t_final))
    throw std::invalid_argument("final time must be a multiple of the time step");

  HqcTrajectory out;
  auto record = [&] {
    out.times.push_back(s.t);
    P1Field u(mesh, s.u);
    out.reconstructed.push_back(solver.reconstruct(u));
    out.macro.push_back(std::move(u));
  };
  record();
  for (long k = 1; k <= steps; ++k) {
    verlet_step(s, force, tau);
    s.t = double(k) * tau;
    if (k % sample_every == 0) record();
  }
  return out;
}

TrajectoryError trajectory_error(const std::vector<double>& times, const std::vector<LatticeField>& reference,
                                 const std::vector<LatticeField>& approximation) {
  if (times.size() != reference.size() || times.size() != approximation.size() || times.empty())
    throw std::invalid_argument("sample-time mismatch");
  TrajectoryError out;
  std::vector<double> h1sq(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto e = lattice_error(reference[k], approximation[k]);
    out.linf_l2 = std::max(out.linf_l2, e.l2);
    h1sq[k] = e.h1 * e.h1;
  }
  if (times.size() == 1) {
    out.l2_h1 = std::sqrt(h1sq[0]);
    return out;
  }
  double integral = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) integral += 0.5 * (times[k] - times[k - 1]) * (h1sq[k] + h1sq[k - 1]);
  out.l2_h1 = std::sqrt(integral);
  return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<double>& times,
                          const std::vector<Eigen::VectorXd>& samples, int dim) {
  out << "time,index";
  for (int i = 0; i < dim; ++i) out << ",u" << i;
  out << '\n';
  char buf[64];
  for (std::size_t k = 0; k < times.size(); ++k) {
    const long n = samples[k].size() / dim;
    for (long j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", times[k]);
      out << buf << ',' << j;
      for (int i = 0; i < dim; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", samples[k][j * dim + i]);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace hqclab
