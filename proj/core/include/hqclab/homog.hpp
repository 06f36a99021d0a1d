#pragma once

#include "hqclab/fem.hpp"
#include "hqclab/lattice_energy.hpp"
#include "hqclab/potential.hpp"
#include "hqclab/solvers.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace hqclab {

struct CellSolution {
  Mat F;
  /// Zero-mean corrector, d values per species.
  Eigen::VectorXd chi;
  double energy = 0.0;
  NewtonReport report;
};

/// Periodic cell problem on one period of a P-periodic model (spacing 1).
class CellProblem {
 public:
  explicit CellProblem(std::shared_ptr<const InteractionModel> model);

  const LatticeEnergy& energy() const { return energy_; }
  const InteractionModel& model() const { return *model_; }

  /// Solution reached by Newton from `guess` (zero when null); residual below
  /// 1e-12 (1 + |F|) in the averaged L2 norm.
  CellSolution solve(const Mat& F, const Eigen::VectorXd* guess = nullptr) const;

 private:
  std::shared_ptr<const InteractionModel> model_;
  LatticeEnergy energy_;
};

CellSolution solve_cell_problem(std::shared_ptr<const InteractionModel> model, const Mat& F,
                                const Eigen::VectorXd* guess = nullptr);

/// Phi0(F) = < V(F R + D_y chi(F)) > with correctors from the zero guess,
/// cached on F rounded to 12 decimals.
class HomogenizedDensity {
 public:
  explicit HomogenizedDensity(std::shared_ptr<const InteractionModel> model);

  int dim() const { return cell_.model().dim(); }
  const CellProblem& cell_problem() const { return cell_; }

  CellSolution cell(const Mat& F) const;
  double phi0(const Mat& F) const;
  /// < sum_r V'_r r^T > at the relaxed corrector.
  Mat dphi0(const Mat& F) const;
  /// Central differences of dphi0, flattened indices.
  Eigen::MatrixXd d2phi0(const Mat& F) const;

 private:
  CellProblem cell_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<long long>, CellSolution> cache_;
};

double harmonic_mean(std::span<const double> psi);

/// sum_T |T| Phi0(grad u|_T).
double homogenized_energy(const HomogenizedDensity& density, const P1Field& u);
/// Nodal gradient of homogenized_energy.
Eigen::VectorXd homogenized_gradient(const HomogenizedDensity& density, const P1Field& u);

struct HomogenizedFemResult {
  P1Field u;
  NewtonReport report;
};

/// Zero-mean critical point of sum_T |T| Phi0(grad u) - load . u, with the
/// residual below tol |load|.
HomogenizedFemResult solve_homogenized_fem(std::shared_ptr<const MacroMesh> mesh, const HomogenizedDensity& density,
                                           const Eigen::VectorXd& load, const NewtonOptions& options = {});

}  // namespace hqclab
