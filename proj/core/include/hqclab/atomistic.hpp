#pragma once

#include "hqclab/lattice.hpp"
#include "hqclab/lattice_energy.hpp"
#include "hqclab/potential.hpp"
#include "hqclab/solvers.hpp"

#include <Eigen/Sparse>

#include <memory>

namespace hqclab {

/// Periodic lattice, interaction model and zero-mean external force.
class EquilibriumProblem {
 public:
  EquilibriumProblem(std::shared_ptr<const Multilattice> lattice, std::shared_ptr<const InteractionModel> model);
  EquilibriumProblem(std::shared_ptr<const Multilattice> lattice, std::shared_ptr<const InteractionModel> model,
                     LatticeField force);

  const std::shared_ptr<const Multilattice>& lattice() const { return lattice_; }
  const std::shared_ptr<const InteractionModel>& model() const { return model_; }
  const LatticeField& force() const { return force_; }
  const LatticeEnergy& energy() const { return *energy_; }

 private:
  std::shared_ptr<const Multilattice> lattice_;
  std::shared_ptr<const InteractionModel> model_;
  LatticeField force_;
  std::shared_ptr<const LatticeEnergy> energy_;
};

/// E(u), the average of the site energies. Throws on inadmissible u.
double total_energy(const EquilibriumProblem& problem, const LatticeField& u);
/// E(u) - <f, u>.
double total_potential(const EquilibriumProblem& problem, const LatticeField& u);
/// Riesz representer of dE(u) in the averaged inner product.
LatticeField energy_gradient(const EquilibriumProblem& problem, const LatticeField& u);
/// Riesz operator of d^2E(u): <H v, w> = d^2E(u)[v, w].
Eigen::SparseMatrix<double> energy_hessian(const EquilibriumProblem& problem, const LatticeField& u);

struct EquilibriumResult {
  LatticeField u;
  NewtonReport report;
};

/// Zero-mean critical point of E(u) - <f, u> reached from `guess`; the
/// residual |dE(u) - f| is measured in the discrete L2 norm relative to 1 + |f|.
EquilibriumResult solve_equilibrium(const EquilibriumProblem& problem, const LatticeField& guess,
                                    const NewtonOptions& options = {});

/// Per-site masses from per-species masses.
Eigen::VectorXd site_masses(const Multilattice& lattice, const std::vector<double>& species_masses);

struct Eigenmode {
  LatticeField mode;  // <M v, v> = 1, first significant entry positive
  double eigenvalue = 0.0;
  int iterations = 0;
};

/// Generalized eigenpair of (d^2E(u_eq), M) with the smallest nonzero
/// eigenvalue, found by block inverse iteration with the translations deflated.
Eigenmode slowest_eigenmode(const EquilibriumProblem& problem, const LatticeField& u_eq,
                            const Eigen::VectorXd& masses, double tol = 1e-10, int max_iterations = 500);

}  // namespace hqclab
