#pragma once

#include <Eigen/Core>

#include <array>
#include <memory>
#include <vector>

namespace hqclab {

inline constexpr int kMaxDim = 2;

// Small fixed-capacity vectors/matrices (d <= 2) that never touch the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using IVec = std::array<long, kMaxDim>;

/// Lattice offset r in units of the lattice spacing, stored exactly as num / q
/// where q is the denominator of the owning UnitCell.
struct Offset {
  IVec num{0, 0};
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// One period P = (p_0, ..., p_{m-1}) of a multilattice, held in exact rationals.
class UnitCell {
 public:
  /// Shifts must lie in [0,1)^d, be pairwise distinct, start with 0, and be
  /// rational with a common denominator of at most 4096.
  UnitCell(int dim, const std::vector<Vec>& shifts);

  /// Uniform 1D period P = {0, 1/m, ..., (m-1)/m}.
  static UnitCell uniform_chain(int m);
  static UnitCell simple(int dim);

  int dim() const { return dim_; }
  int species_count() const { return static_cast<int>(num_.size()); }
  long denominator() const { return q_; }
  const IVec& shift_numerator(int species) const { return num_[species]; }
  Vec shift(int species) const;

  /// Exact offset for a real vector; throws if it is not a multiple of 1/q.
  Offset offset(const Vec& r) const;
  Vec vector(const Offset& r) const;

  struct Target {
    int species;
    IVec cell_shift;  // Bravais cells crossed by x + r
  };
  /// Species and cell jump reached from a site of `species` by offset r.
  /// Throws std::invalid_argument when x + r is not a site.
  Target resolve(int species, const Offset& r) const;

  /// Offsets to the nearest neighbour used by the discrete H1 norm: the next
  /// site along the chain in 1D, the two axis directions in 2D.
  std::vector<Offset> norm_offsets(int species) const;

  friend bool operator==(const UnitCell&, const UnitCell&) = default;

 private:
  int dim_;
  long q_;
  std::vector<IVec> num_;
};

/// Periodic multilattice of `cells_per_side`^d Bravais cells with spacing eps.
/// The global lattice on [0,1)^d has cells_per_side * eps = 1; sampling
/// domains reuse the type with fewer cells.
class Multilattice {
 public:
  Multilattice(UnitCell cell, long cells_per_side, double spacing);

  int dim() const { return cell_.dim(); }
  int species_count() const { return cell_.species_count(); }
  double spacing() const { return spacing_; }
  long cells_per_side() const { return n_; }
  long cell_count() const { return cells_; }
  long site_count() const { return cells_ * cell_.species_count(); }
  long dof_count() const { return site_count() * dim(); }
  const UnitCell& unit_cell() const { return cell_; }

  /// Cell multi-index wrapped into [0, n)^d.
  IVec wrap(IVec cell) const;
  long cell_index(const IVec& cell) const;
  IVec cell_of(long cell_index) const;
  long site_index(const IVec& cell, int species) const;
  long site_index_of_cell(long cell_index, int species) const {
    return cell_index * species_count() + species;
  }
  IVec site_cell(long site) const { return cell_of(site / species_count()); }
  int site_species(long site) const { return static_cast<int>(site % species_count()); }

  Vec position(long site) const;
  /// Site reached from `site` by offset r, with periodic wrap.
  long neighbor(long site, const Offset& r) const;

  friend bool operator==(const Multilattice& a, const Multilattice& b) {
    return a.cell_ == b.cell_ && a.n_ == b.n_ && a.spacing_ == b.spacing_;
  }

 private:
  UnitCell cell_;
  long n_;
  double spacing_;
  long cells_;
};

/// The lattice on [0,1)^d with spacing eps (1/eps must be integral).
std::shared_ptr<const Multilattice> build_multilattice(int dim, double eps, const std::vector<Vec>& shifts);

/// Periodic R^d-valued field on the sites of a multilattice, stored site-major.
class LatticeField {
 public:
  explicit LatticeField(std::shared_ptr<const Multilattice> lattice);
  LatticeField(std::shared_ptr<const Multilattice> lattice, Eigen::VectorXd values);

  const Multilattice& lattice() const { return *lattice_; }
  const std::shared_ptr<const Multilattice>& lattice_ptr() const { return lattice_; }
  int dim() const { return lattice_->dim(); }
  long site_count() const { return lattice_->site_count(); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  auto at(long site) { return values_.segment(site * dim(), dim()); }
  auto at(long site) const { return values_.segment(site * dim(), dim()); }

 private:
  std::shared_ptr<const Multilattice> lattice_;
  Eigen::VectorXd values_;
};

LatticeField discrete_derivative(const LatticeField& u, const Offset& r);
Vec average(const LatticeField& u);
double inner_product(const LatticeField& u, const LatticeField& v);
LatticeField project_zero_mean(const LatticeField& u);

/// Averages over sites of a site-major vector with `dim` components per site.
Vec average_dofs(const Eigen::VectorXd& values, int dim);
void subtract_mean(Eigen::VectorXd& values, int dim);

struct DiscreteNorms {
  double l2 = 0.0;
  double h1 = 0.0;
};
DiscreteNorms discrete_norms(const LatticeField& u);

}  // namespace hqclab
