#pragma once

#include "hqclab/lattice.hpp"
#include "hqclab/potential.hpp"

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace hqclab {

/// Index of F(i, j) in flattened d x d gradients (column major).
inline int flat_index(int i, int j, int d) { return i + d * j; }

/// Energy w -> < V_x(F r + D_r w) > averaged over a periodic lattice domain.
///
/// One engine serves the full lattice (F = 0), sampling domains (spacing eps,
/// possibly several cells) and the unit-cell problem (spacing 1, one cell).
/// All derivatives are partial derivatives with respect to the raw unknowns,
/// not Riesz representers.
class LatticeEnergy {
 public:
  /// `origin` is the global Bravais cell of the domain's cell 0; it only
  /// matters for models whose potentials vary from cell to cell.
  LatticeEnergy(std::shared_ptr<const Multilattice> domain, std::shared_ptr<const InteractionModel> model,
                IVec origin = {0, 0});

  const Multilattice& domain() const { return *domain_; }
  const std::shared_ptr<const Multilattice>& domain_ptr() const { return domain_; }
  const InteractionModel& model() const { return *model_; }
  int dim() const { return domain_->dim(); }
  long site_count() const { return domain_->site_count(); }
  long dof_count() const { return domain_->dof_count(); }
  bool quadratic() const { return model_->quadratic(); }

  /// Gap tuple of one site (bond-major).
  void gaps(const Eigen::VectorXd& w, const Mat& F, long site, double* out) const;

  /// +inf when some bond is inadmissible.
  double energy(const Eigen::VectorXd& w, const Mat& F) const;
  /// Writes dE/dw and returns E.
  double gradient(const Eigen::VectorXd& w, const Mat& F, Eigen::VectorXd& grad) const;
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& w, const Mat& F) const;

  /// dE/dF as a d x d matrix, i.e. < sum_r V'_r r^T >.
  Mat stress(const Eigen::VectorXd& w, const Mat& F) const;
  /// d^2E/dw dF: one column per flattened entry of F.
  Eigen::MatrixXd mixed(const Eigen::VectorXd& w, const Mat& F) const;
  /// d^2E/dF^2 in flattened indices.
  Eigen::MatrixXd tangent(const Eigen::VectorXd& w, const Mat& F) const;

  /// Energy of each site, used for diagnostics.
  Eigen::VectorXd site_energies(const Eigen::VectorXd& w, const Mat& F) const;

 private:
  struct SiteBonds {
    long first;  // into targets_/r_
    int count;
    const SitePotential* potential;
  };

  std::shared_ptr<const Multilattice> domain_;
  std::shared_ptr<const InteractionModel> model_;
  std::vector<SiteBonds> sites_;
  std::vector<long> targets_;
  std::vector<Vec> r_;
  int max_bonds_ = 0;
};

}  // namespace hqclab
