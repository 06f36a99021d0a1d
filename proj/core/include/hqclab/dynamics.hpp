#pragma once

#include "hqclab/atomistic.hpp"
#include "hqclab/fem.hpp"
#include "hqclab/hqc.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace hqclab {

/// Writes the force (not the acceleration) for a displacement vector.
using ForceEvaluator = std::function<void(const Eigen::VectorXd& u, Eigen::VectorXd& force)>;

struct DynamicState {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd mass;  // one entry per unknown
  Eigen::VectorXd force;
  double t = 0.0;
};

/// State at rest at u0, with the force evaluated once.
DynamicState make_state(Eigen::VectorXd u0, Eigen::VectorXd mass, const ForceEvaluator& force);

/// Velocity Verlet: half kick, drift, force update, half kick.
void verlet_step(DynamicState& state, const ForceEvaluator& force, double tau);

struct InitialCondition {
  LatticeField u_eq;
  LatticeField u1;
  LatticeField u0;
  double eigenvalue = 0.0;
};

/// u0 = u_eq + amplitude u1 / |D u1|_inf with u1 the slowest mode of
/// (d^2E(u_eq), M); D is the nearest-neighbour difference quotient.
InitialCondition initial_condition(const EquilibriumProblem& problem, const std::vector<double>& species_masses,
                                   double amplitude = 0.01);

/// max over sites and norm offsets of |D_r u|.
double max_difference_quotient(const LatticeField& u);

struct AtomisticTrajectory {
  std::vector<double> times;
  std::vector<LatticeField> samples;
  std::vector<double> total_energy;  // kinetic + potential at each sample
  double max_energy_drift = 0.0;     // max |H(t) - H(0)| / |H(0)| over all steps
  double max_momentum_drift = 0.0;
};

/// Integrates <M u'', v> = -<dE(u), v> from rest with steps of tau, storing
/// every `sample_every`-th step (and t = 0).
AtomisticTrajectory run_atomistic_dynamics(const EquilibriumProblem& problem, const std::vector<double>& species_masses,
                                           const LatticeField& u0, double t_final, double tau, long sample_every = 1);

struct HqcTrajectory {
  std::vector<double> times;
  std::vector<P1Field> macro;
  std::vector<LatticeField> reconstructed;
};

/// Lumped-mass macro dynamics with node mass <M>_P times the nodal share of
/// the domain; correctors are re-solved at every force evaluation.
HqcTrajectory run_hqc_dynamics(HqcSolver& solver, const std::vector<double>& species_masses, const P1Field& u0,
                               double t_final, double tau, long sample_every = 1);

/// Nodal lumped masses of the macro mesh.
Eigen::VectorXd lumped_masses(const MacroMesh& mesh, double density);

struct TrajectoryError {
  double linf_l2 = 0.0;
  double l2_h1 = 0.0;
};

/// Max over samples of the L2 error, and the trapezoid-in-time L2 norm of the
/// H1 error; a single sample gives the static errors.
TrajectoryError trajectory_error(const std::vector<double>& times, const std::vector<LatticeField>& reference,
                                 const std::vector<LatticeField>& approximation);

/// Columns time, index, u0[, u1].
void write_trajectory_csv(std::ostream& out, const std::vector<double>& times,
                          const std::vector<Eigen::VectorXd>& samples, int dim);

}  // namespace hqclab
