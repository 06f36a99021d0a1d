#pragma once

#include "hqclab/fem.hpp"
#include "hqclab/lattice_energy.hpp"
#include "hqclab/potential.hpp"
#include "hqclab/solvers.hpp"

#include <Eigen/Sparse>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace hqclab {

/// Block of cells^d Bravais cells (cells = 1: one period) attached to a
/// macro element. Cell coordinates are global and unwrapped.
struct SamplingDomain {
  long element = 0;
  IVec representative{0, 0};
  IVec origin{0, 0};
  long cells = 1;
  std::shared_ptr<const Multilattice> lattice;  // the periodic block, spacing eps

  /// Unwrapped position of a block site.
  Vec position(long site) const;
  /// Index of a block site in the global lattice.
  long global_site(const Multilattice& global, long site) const;
};

/// Representative site = Bravais site nearest the barycenter (ties to the
/// smaller coordinate); a block of `cells` cells is centred on it. A block as
/// large as the lattice is anchored at the origin.
std::vector<SamplingDomain> place_sampling_domains(const MacroMesh& mesh, const Multilattice& lattice,
                                                   long cells = 1);

/// Zero-mean corrector problem on one sampling domain.
class MicroProblem {
 public:
  MicroProblem(std::shared_ptr<const InteractionModel> model, const SamplingDomain& domain);

  const LatticeEnergy& energy() const { return energy_; }
  int dim() const { return energy_.dim(); }

  struct Result {
    Eigen::VectorXd corrector;
    NewtonReport report;
    bool stable = true;
  };
  /// Corrector for macro gradient F reached from `guess` (zero when null).
  Result solve(const Mat& F, const Eigen::VectorXd* guess, double tol) const;
  /// dU/dF_k for each flattened entry k, at a converged corrector.
  std::vector<Eigen::VectorXd> sensitivities(const Eigen::VectorXd& corrector, const Mat& F) const;
  /// E_FF + E_FU dU/dF.
  Eigen::MatrixXd tangent(const Eigen::VectorXd& corrector, const Mat& F,
                          const std::vector<Eigen::VectorXd>& sens) const;

  /// Quadratic models only: sensitivities and relaxed tangent, computed once.
  const std::vector<Eigen::VectorXd>& linear_sensitivities() const;
  const Eigen::MatrixXd& linear_tangent() const;
  /// Quadratic models only: E_FF with the corrector frozen at zero.
  const Eigen::MatrixXd& affine_tangent() const;

 private:
  LatticeEnergy energy_;
  mutable std::once_flag linear_once_, affine_once_;
  mutable std::vector<Eigen::VectorXd> lin_sens_;
  mutable Eigen::MatrixXd lin_tangent_, affine_tangent_;
};

struct MicroState {
  Mat F;
  /// Empty for quadratic models, whose correctors are rebuilt on demand.
  Eigen::VectorXd corrector;
  double energy = 0.0;
  Mat stress;
  Eigen::MatrixXd tangent;
  NewtonReport report;
  bool stable = true;
};

/// SamplingDomain averages f over each sampling domain, Representative uses
/// f at the representative site only, Lattice sums f against v^h over every
/// site (the atomistic load functional restricted to the mesh space).
enum class LoadMode { SamplingDomain, Representative, Lattice };

struct HqcOptions {
  double tol = 1e-10;
  int max_iterations = 50;
  double inner_factor = 0.01;
  /// false freezes correctors at zero (Cauchy-Born closure).
  bool relax = true;
  bool check_stability = false;
  LoadMode load = LoadMode::SamplingDomain;
  int threads = 1;
};

struct HqcSolution {
  P1Field u;
  NewtonReport report;
};

class HqcSolver {
 public:
  HqcSolver(std::shared_ptr<const InteractionModel> model, std::shared_ptr<const Multilattice> lattice,
            std::shared_ptr<const MacroMesh> mesh, HqcOptions options = {}, long sampling_cells = 1);

  const std::vector<SamplingDomain>& domains() const { return domains_; }
  const MacroMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const MacroMesh>& mesh_ptr() const { return mesh_; }
  const Multilattice& lattice() const { return *lattice_; }
  const HqcOptions& options() const { return options_; }
  const MicroProblem& micro_problem(long element) const { return *micro_[element]; }
  const MicroState& state(long element) const { return states_[element]; }

  /// Re-solves every microproblem at the gradients of u, warm-started from
  /// the stored correctors. Throws SolverError naming the element on failure.
  void update(const P1Field& u);
  /// Forgets stored correctors so the next update starts from zero.
  void reset();

  /// Quantities at the last update.
  double energy() const;
  Eigen::VectorXd gradient() const;
  Eigen::SparseMatrix<double> hessian() const;
  /// Gradient through the sensitivities, without the simplification that
  /// the micro equilibrium provides; used to check that simplification.
  Eigen::VectorXd gradient_with_sensitivities() const;

  Eigen::VectorXd rhs(const LatticeField& f) const;
  HqcSolution solve(const LatticeField& f, const P1Field* guess = nullptr);

  /// Corrector of an element at the last update.
  Eigen::VectorXd corrector(long element) const;
  /// Affine part plus periodically tiled corrector of the owning element.
  LatticeField reconstruct(const P1Field& u);

 private:
  void update_element(long e, const Mat& F);

  std::shared_ptr<const InteractionModel> model_;
  std::shared_ptr<const Multilattice> lattice_;
  std::shared_ptr<const MacroMesh> mesh_;
  HqcOptions options_;
  std::vector<SamplingDomain> domains_;
  std::vector<std::shared_ptr<const MicroProblem>> micro_;
  std::vector<MicroState> states_;
  std::vector<bool> fresh_;
};

struct SiteOwner {
  long element;
  IVec image;  // whole periods added to the site position
};
/// Element owning a lattice site; sites on shared faces go to the element
/// with the lexicographically smallest barycenter.
SiteOwner site_owner(const MacroMesh& mesh, const Multilattice& lattice, long site);

/// Free-function entry points over the solver and micro problems.
MicroState micro_solve(const MicroProblem& problem, const AffineMap& u_lin, const Eigen::VectorXd* guess,
                       double tol = 1e-12);
/// Sensitivity of the reconstruction to each vector hat function (a, i) of
/// the element: one zero-mean field per (vertex, component), vertex-major.
std::vector<Eigen::VectorXd> micro_sensitivity(const MicroProblem& problem, const MicroState& state,
                                               const Eigen::MatrixXd& basis_gradients);
double hqc_energy(HqcSolver& solver, const P1Field& u);
Eigen::VectorXd hqc_gradient(HqcSolver& solver, const P1Field& u);
Eigen::SparseMatrix<double> hqc_hessian(HqcSolver& solver, const P1Field& u);
HqcSolution solve_hqc(std::shared_ptr<const InteractionModel> model, std::shared_ptr<const Multilattice> lattice,
                      std::shared_ptr<const MacroMesh> mesh, const LatticeField& f, HqcOptions options = {});
double affine_closure_energy(std::shared_ptr<const InteractionModel> model, std::shared_ptr<const Multilattice> lattice,
                             std::shared_ptr<const MacroMesh> mesh, const P1Field& u, long sampling_cells = 1);

}  // namespace hqclab
