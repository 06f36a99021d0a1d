#include "hqclab/fem.hpp"

#include "hqclab/lattice_energy.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

namespace hqclab {

namespace {

long wrap_index(long i, long n) { return ((i % n) + n) % n; }

}  // namespace

MacroMesh::MacroMesh(int dim, long n) : dim_(dim), n_(n) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("mesh dimension must be 1 or 2");
  if (n < 1) throw std::invalid_argument("mesh needs at least one cell per side");
  measure_ = dim == 1 ? 1.0 / double(n) : 0.5 / double(n * n);
  for (int t = 0; t < (dim == 1 ? 1 : 2); ++t) {
    long e = t;
    IVec v0 = vertex(e, 0);
    Mat J(dim, dim);
    for (int a = 1; a <= dim; ++a)
      for (int i = 0; i < dim; ++i) J(i, a - 1) = double(vertex(e, a)[i] - v0[i]) / double(n);
    Mat Jinv = J.inverse();
    auto& G = grads_[t];
    G.resize(dim + 1, dim);
    for (int a = 1; a <= dim; ++a) G.row(a) = Jinv.row(a - 1);
    G.row(0) = -G.bottomRows(dim).colwise().sum();
  }
}

double MacroMesh::h() const { return dim_ == 1 ? 1.0 / double(n_) : std::sqrt(2.0) / double(n_); }

IVec MacroMesh::vertex(long e, int a) const {
  if (dim_ == 1) return {e + a, 0};
  const long sq = e / 2;
  const long i = sq % n_, j = sq / n_;
  static constexpr long lower[3][2] = {{0, 0}, {1, 0}, {0, 1}};
  static constexpr long upper[3][2] = {{1, 0}, {1, 1}, {0, 1}};
  const auto& o = (e % 2 == 0) ? lower[a] : upper[a];
  return {i + o[0], j + o[1]};
}

long MacroMesh::node_of(IVec v) const {
  if (dim_ == 1) return wrap_index(v[0], n_);
  return wrap_index(v[0], n_) + n_ * wrap_index(v[1], n_);
}

IVec MacroMesh::node_coordinates(long node) const {
  if (dim_ == 1) return {node, 0};
  return {node % n_, node / n_};
}

Vec MacroMesh::node_position(long node) const {
  IVec c = node_coordinates(node);
  Vec x(dim_);
  for (int i = 0; i < dim_; ++i) x[i] = double(c[i]) / double(n_);
  return x;
}

Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim> MacroMesh::basis_gradients(long e) const {
  return grads_[dim_ == 1 ? 0 : e % 2];
}

Vec MacroMesh::barycenter(long e) const {
  Vec b = Vec::Zero(dim_);
  for (int a = 0; a <= dim_; ++a) {
    IVec v = vertex(e, a);
    for (int i = 0; i < dim_; ++i) b[i] += double(v[i]);
  }
  return b / (double(dim_ + 1) * double(n_));
}

long MacroMesh::locate(const Vec& x) const {
  Vec y(dim_);
  IVec c{0, 0};
  for (int i = 0; i < dim_; ++i) {
    double t = x[i] - std::floor(x[i]);
    double s = t * double(n_);
    c[i] = std::min<long>(n_ - 1, static_cast<long>(std::floor(s)));
    y[i] = s - double(c[i]);
  }
  if (dim_ == 1) return c[0];
  const long sq = c[0] + n_ * c[1];
  return 2 * sq + (y[0] + y[1] <= 1.0 ? 0 : 1);
}

std::shared_ptr<const MacroMesh> build_mesh(int dim, long n) { return std::make_shared<const MacroMesh>(dim, n); }

void check_alignment(const MacroMesh& mesh, const Multilattice& lattice) {
  if (mesh.dim() != lattice.dim()) throw std::invalid_argument("mesh and lattice dimensions differ");
  const double cells = double(lattice.cells_per_side()) * lattice.spacing();
  if (std::abs(cells - 1.0) > 1e-12) throw std::invalid_argument("lattice does not cover the unit domain");
  if (lattice.cells_per_side() % mesh.cells_per_side() != 0)
    throw std::invalid_argument("mesh size must divide the number of lattice cells per side");
}

P1Field::P1Field(std::shared_ptr<const MacroMesh> mesh)
    : mesh_(std::move(mesh)), values_(Eigen::VectorXd::Zero(mesh_->node_count() * mesh_->dim())) {}

P1Field::P1Field(std::shared_ptr<const MacroMesh> mesh, Eigen::VectorXd values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (values_.size() != mesh_->node_count() * mesh_->dim()) throw std::invalid_argument("P1 field has wrong size");
}

Vec P1Field::evaluate(const Vec& x) const {
  const auto& M = *mesh_;
  const long e = M.locate(x);
  // Bring x into the element's unwrapped coordinates.
  Vec y(dim());
  for (int i = 0; i < dim(); ++i) y[i] = x[i] - std::floor(x[i]);
  return affine_extension(*this, e)(y);
}

P0Field::P0Field(std::shared_ptr<const MacroMesh> mesh, int width)
    : mesh_(std::move(mesh)), width_(width), values_(Eigen::VectorXd::Zero(mesh_->element_count() * width)) {}

Mat element_gradient(const P1Field& u, long e) {
  const auto& M = u.mesh();
  const int d = M.dim();
  if (e < 0 || e >= M.element_count()) throw std::invalid_argument("element out of range");
  const auto G = M.basis_gradients(e);
  Mat F = Mat::Zero(d, d);
  for (int a = 0; a <= d; ++a) F += u.at(M.node(e, a)) * G.row(a);
  return F;
}

AffineMap affine_extension(const P1Field& u, long e) {
  const auto& M = u.mesh();
  const int d = M.dim();
  AffineMap A;
  IVec v0 = M.vertex(e, 0);
  A.anchor.resize(d);
  for (int i = 0; i < d; ++i) A.anchor[i] = double(v0[i]) / double(M.cells_per_side());
  A.value = u.at(M.node(e, 0));
  A.gradient = element_gradient(u, e);
  return A;
}

P1Field interpolate(std::shared_ptr<const MacroMesh> mesh, const std::function<Vec(const Vec&)>& f) {
  P1Field u(mesh);
  for (long k = 0; k < mesh->node_count(); ++k) u.at(k) = f(mesh->node_position(k));
  return u;
}

Vec integral(const P1Field& u) {
  const auto& M = u.mesh();
  const int d = M.dim();
  Vec s = Vec::Zero(d);
  for (long e = 0; e < M.element_count(); ++e)
    for (int a = 0; a <= d; ++a) s += M.element_measure(e) / double(d + 1) * u.at(M.node(e, a));
  return s;
}

P1Field project_zero_mean(const P1Field& u) {
  P1Field out = u;
  const Vec m = integral(u);
  for (long k = 0; k < u.mesh().node_count(); ++k) out.at(k) -= m;
  return out;
}

LatticeField sample(const P1Field& u, std::shared_ptr<const Multilattice> lattice) {
  if (lattice->dim() != u.dim()) throw std::invalid_argument("dimension mismatch");
  LatticeField out(lattice);
  for (long s = 0; s < lattice->site_count(); ++s) out.at(s) = u.evaluate(lattice->position(s));
  return out;
}

DiscreteNorms lattice_error(const LatticeField& u, const LatticeField& v) {
  if (!(u.lattice() == v.lattice())) throw std::invalid_argument("fields live on different lattices");
  return discrete_norms(LatticeField(u.lattice_ptr(), u.values() - v.values()));
}

DiscreteNorms lattice_error(const LatticeField& u, const P1Field& v) {
  return lattice_error(u, sample(v, u.lattice_ptr()));
}

Eigen::SparseMatrix<double> stiffness_matrix(const MacroMesh& mesh, const Eigen::MatrixXd& C) {
  const int d = mesh.dim();
  if (C.rows() != d * d || C.cols() != d * d) throw std::invalid_argument("tensor has wrong size");
  std::vector<Eigen::Triplet<double>> trip;
  for (long e = 0; e < mesh.element_count(); ++e) {
    const auto G = mesh.basis_gradients(e);
    const double w = mesh.element_measure(e);
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b)
        for (int i = 0; i < d; ++i)
          for (int k = 0; k < d; ++k) {
            double v = 0.0;
            for (int j = 0; j < d; ++j)
              for (int l = 0; l < d; ++l) v += C(flat_index(i, j, d), flat_index(k, l, d)) * G(a, j) * G(b, l);
            trip.emplace_back(mesh.node(e, a) * d + i, mesh.node(e, b) * d + k, w * v);
          }
  }
  const long n = mesh.node_count() * d;
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

}  // namespace hqclab
