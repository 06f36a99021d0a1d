#pragma once

#include "hqclab/lattice.hpp"

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <memory>

namespace hqclab {

/// Uniform periodic simplicial mesh of [0,1)^d with n cells per side.
/// In 2D square (i, j) is split into T1 = {(i,j), (i+1,j), (i,j+1)} and
/// T2 = {(i+1,j), (i+1,j+1), (i,j+1)}; element 2(i + n j) + t.
class MacroMesh {
 public:
  MacroMesh(int dim, long n);

  int dim() const { return dim_; }
  long cells_per_side() const { return n_; }
  long node_count() const { return dim_ == 1 ? n_ : n_ * n_; }
  long element_count() const { return dim_ == 1 ? n_ : 2 * n_ * n_; }
  int vertices_per_element() const { return dim_ + 1; }
  double h() const;
  double element_measure(long) const { return measure_; }

  /// Vertex a of element e in integer units of 1/n; not wrapped, so the
  /// vertices of an element are always geometrically adjacent.
  IVec vertex(long e, int a) const;
  long node(long e, int a) const { return node_of(vertex(e, a)); }
  long node_of(IVec v) const;
  IVec node_coordinates(long node) const;
  Vec node_position(long node) const;
  /// Rows are the gradients of the element's hat functions.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim> basis_gradients(long e) const;
  Vec barycenter(long e) const;
  /// Element containing x after wrapping into [0,1)^d.
  long locate(const Vec& x) const;

 private:
  int dim_;
  long n_;
  double measure_;
  std::array<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim>, 2> grads_;
};

std::shared_ptr<const MacroMesh> build_mesh(int dim, long n);
/// Throws unless element boundaries fall on Bravais sites of the lattice.
void check_alignment(const MacroMesh& mesh, const Multilattice& lattice);

/// Continuous periodic piecewise-linear field with d components per node.
class P1Field {
 public:
  explicit P1Field(std::shared_ptr<const MacroMesh> mesh);
  P1Field(std::shared_ptr<const MacroMesh> mesh, Eigen::VectorXd values);

  const MacroMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const MacroMesh>& mesh_ptr() const { return mesh_; }
  int dim() const { return mesh_->dim(); }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  auto at(long node) { return values_.segment(node * dim(), dim()); }
  auto at(long node) const { return values_.segment(node * dim(), dim()); }

  Vec evaluate(const Vec& x) const;

 private:
  std::shared_ptr<const MacroMesh> mesh_;
  Eigen::VectorXd values_;
};

/// Piecewise-constant field with `width` values per element.
class P0Field {
 public:
  P0Field(std::shared_ptr<const MacroMesh> mesh, int width);
  const MacroMesh& mesh() const { return *mesh_; }
  int width() const { return width_; }
  auto at(long e) { return values_.segment(e * width_, width_); }
  auto at(long e) const { return values_.segment(e * width_, width_); }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

 private:
  std::shared_ptr<const MacroMesh> mesh_;
  int width_;
  Eigen::VectorXd values_;
};

Mat element_gradient(const P1Field& u, long e);

/// x -> value + F (x - anchor).
struct AffineMap {
  Vec anchor;
  Vec value;
  Mat gradient;
  Vec operator()(const Vec& x) const { return value + gradient * (x - anchor); }
};
/// Affine map agreeing with u on element e, in the element's unwrapped coordinates.
AffineMap affine_extension(const P1Field& u, long e);

P1Field interpolate(std::shared_ptr<const MacroMesh> mesh, const std::function<Vec(const Vec&)>& f);
Vec integral(const P1Field& u);
P1Field project_zero_mean(const P1Field& u);
/// Values of u at the lattice sites.
LatticeField sample(const P1Field& u, std::shared_ptr<const Multilattice> lattice);

DiscreteNorms lattice_error(const LatticeField& u, const LatticeField& v);
DiscreteNorms lattice_error(const LatticeField& u, const P1Field& v);

/// Stiffness sum_T |T| C : (grad phi_a (x) e_i) : (grad phi_b (x) e_k) for a
/// constant tensor C in flattened indices; size (nodes d) x (nodes d).
Eigen::SparseMatrix<double> stiffness_matrix(const MacroMesh& mesh, const Eigen::MatrixXd& C);

}  // namespace hqclab
