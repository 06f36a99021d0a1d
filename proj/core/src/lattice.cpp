#include "hqclab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hqclab {

namespace {

constexpr long kMaxDenominator = 4096;

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

long floor_mod(long a, long b) { return a - floor_div(a, b) * b; }

}  // namespace

UnitCell::UnitCell(int dim, const std::vector<Vec>& shifts) : dim_(dim), q_(1) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension must be 1 or 2");
  if (shifts.empty()) throw std::invalid_argument("at least one shift is required");
  for (const auto& p : shifts) {
    if (p.size() != dim) throw std::invalid_argument("shift has wrong dimension");
    for (int i = 0; i < dim; ++i)
      if (!(p[i] >= 0.0 && p[i] < 1.0)) throw std::invalid_argument("shift outside [0,1)^d");
  }
  if (shifts[0].norm() != 0.0) throw std::invalid_argument("first shift must be zero");

  bool found = false;
  for (long q = 1; q <= kMaxDenominator && !found; ++q) {
    found = true;
    for (const auto& p : shifts)
      for (int i = 0; i < dim; ++i)
        if (std::abs(p[i] * q - std::round(p[i] * q)) > 1e-9) found = false;
    if (found) q_ = q;
  }
  if (!found) throw std::invalid_argument("shifts are not rational with a small denominator");

  for (const auto& p : shifts) {
    IVec n{0, 0};
    for (int i = 0; i < dim; ++i) n[i] = std::lround(p[i] * q_);
    if (std::find(num_.begin(), num_.end(), n) != num_.end())
      throw std::invalid_argument("duplicate shift");
    num_.push_back(n);
  }
}

UnitCell UnitCell::uniform_chain(int m) {
  if (m < 1) throw std::invalid_argument("species count must be positive");
  std::vector<Vec> shifts;
  for (int a = 0; a < m; ++a) shifts.push_back(Vec::Constant(1, double(a) / m));
  return UnitCell(1, shifts);
}

UnitCell UnitCell::simple(int dim) { return UnitCell(dim, {Vec::Zero(dim)}); }

Vec UnitCell::shift(int species) const {
  Vec p(dim_);
  for (int i = 0; i < dim_; ++i) p[i] = double(num_[species][i]) / q_;
  return p;
}

Offset UnitCell::offset(const Vec& r) const {
  if (r.size() != dim_) throw std::invalid_argument("offset has wrong dimension");
  Offset o;
  for (int i = 0; i < dim_; ++i) {
    double s = r[i] * q_;
    if (std::abs(s - std::round(s)) > 1e-9 * std::max(1.0, std::abs(s)))
      throw std::invalid_argument("offset is not commensurate with the unit cell");
    o.num[i] = std::lround(s);
  }
  return o;
}

Vec UnitCell::vector(const Offset& r) const {
  Vec v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = double(r.num[i]) / q_;
  return v;
}

UnitCell::Target UnitCell::resolve(int species, const Offset& r) const {
  IVec t{0, 0};
  for (int i = 0; i < dim_; ++i) t[i] = num_[species][i] + r.num[i];
  for (int b = 0; b < species_count(); ++b) {
    bool match = true;
    IVec jump{0, 0};
    for (int i = 0; i < dim_ && match; ++i) {
      long diff = t[i] - num_[b][i];
      if (floor_mod(diff, q_) != 0) match = false;
      else jump[i] = diff / q_;
    }
    if (match) return {b, jump};
  }
  throw std::invalid_argument("offset does not connect species " + std::to_string(species) +
                              " to a lattice site");
}

std::vector<Offset> UnitCell::norm_offsets(int species) const {
  if (dim_ == 2) return {Offset{{q_, 0}}, Offset{{0, q_}}};
  long here = num_[species][0];
  long next = here + q_;
  for (const auto& n : num_)
    if (n[0] > here) next = std::min(next, n[0]);
  if (next == here + q_) {
    // Wrap to the smallest shift in the next cell.
    long lowest = q_;
    for (const auto& n : num_) lowest = std::min(lowest, n[0]);
    next = lowest + q_;
  }
  return {Offset{{next - here, 0}}};
}

Multilattice::Multilattice(UnitCell cell, long cells_per_side, double spacing)
    : cell_(std::move(cell)), n_(cells_per_side), spacing_(spacing) {
  if (n_ < 1) throw std::invalid_argument("cells per side must be positive");
  if (!(spacing_ > 0.0)) throw std::invalid_argument("spacing must be positive");
  cells_ = cell_.dim() == 1 ? n_ : n_ * n_;
}

IVec Multilattice::wrap(IVec cell) const {
  for (int i = 0; i < dim(); ++i) cell[i] = floor_mod(cell[i], n_);
  return cell;
}

long Multilattice::cell_index(const IVec& cell) const {
  IVec c = wrap(cell);
  return dim() == 1 ? c[0] : c[0] + n_ * c[1];
}

IVec Multilattice::cell_of(long index) const {
  if (dim() == 1) return {index, 0};
  return {index % n_, index / n_};
}

long Multilattice::site_index(const IVec& cell, int species) const {
  return cell_index(cell) * species_count() + species;
}

Vec Multilattice::position(long site) const {
  IVec c = site_cell(site);
  Vec x = cell_.shift(site_species(site));
  for (int i = 0; i < dim(); ++i) x[i] = (x[i] + double(c[i])) * spacing_;
  return x;
}

long Multilattice::neighbor(long site, const Offset& r) const {
  auto t = cell_.resolve(site_species(site), r);
  IVec c = site_cell(site);
  for (int i = 0; i < dim(); ++i) c[i] += t.cell_shift[i];
  return site_index(c, t.species);
}

std::shared_ptr<const Multilattice> build_multilattice(int dim, double eps, const std::vector<Vec>& shifts) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  double inv = 1.0 / eps;
  long n = std::lround(inv);
  if (n < 1 || std::abs(inv - double(n)) > 1e-9 * inv)
    throw std::invalid_argument("1/eps must be a positive integer");
  return std::make_shared<const Multilattice>(UnitCell(dim, shifts), n, 1.0 / double(n));
}

LatticeField::LatticeField(std::shared_ptr<const Multilattice> lattice)
    : lattice_(std::move(lattice)), values_(Eigen::VectorXd::Zero(lattice_->dof_count())) {}

LatticeField::LatticeField(std::shared_ptr<const Multilattice> lattice, Eigen::VectorXd values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
  if (values_.size() != lattice_->dof_count()) throw std::invalid_argument("field size does not match lattice");
}

LatticeField discrete_derivative(const LatticeField& u, const Offset& r) {
  const auto& L = u.lattice();
  LatticeField out(u.lattice_ptr());
  const double inv = 1.0 / L.spacing();
  for (long s = 0; s < L.site_count(); ++s) out.at(s) = (u.at(L.neighbor(s, r)) - u.at(s)) * inv;
  return out;
}

Vec average_dofs(const Eigen::VectorXd& values, int dim) {
  const long sites = values.size() / dim;
  Vec a = Vec::Zero(dim);
  for (long s = 0; s < sites; ++s) a += values.segment(s * dim, dim);
  return a / double(sites);
}

void subtract_mean(Eigen::VectorXd& values, int dim) {
  Vec a = average_dofs(values, dim);
  const long sites = values.size() / dim;
  for (long s = 0; s < sites; ++s) values.segment(s * dim, dim) -= a;
}

Vec average(const LatticeField& u) { return average_dofs(u.values(), u.dim()); }

double inner_product(const LatticeField& u, const LatticeField& v) {
  if (!(u.lattice() == v.lattice())) throw std::invalid_argument("fields live on different lattices");
  return u.values().dot(v.values()) / double(u.site_count());
}

LatticeField project_zero_mean(const LatticeField& u) {
  LatticeField out = u;
  subtract_mean(out.values(), u.dim());
  return out;
}

DiscreteNorms discrete_norms(const LatticeField& u) {
  const auto& L = u.lattice();
  const auto& cell = L.unit_cell();
  const double inv = 1.0 / L.spacing();
  double sq = u.values().squaredNorm();
  double dsq = 0.0;
  std::vector<std::vector<Offset>> offsets(cell.species_count());
  for (int a = 0; a < cell.species_count(); ++a) offsets[a] = cell.norm_offsets(a);
  for (long s = 0; s < L.site_count(); ++s)
    for (const auto& r : offsets[L.site_species(s)])
      dsq += ((u.at(L.neighbor(s, r)) - u.at(s)) * inv).squaredNorm();
  const double N = double(L.site_count());
  return {std::sqrt(sq / N), std::sqrt((sq + dsq) / N)};
}

}  // namespace hqclab
