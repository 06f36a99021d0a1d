#include "hqclab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace hqclab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<Vec> unpack(const double* gaps, int k, int d) {
  std::vector<Vec> out(k, Vec(d));
  for (int b = 0; b < k; ++b)
    for (int i = 0; i < d; ++i) out[b][i] = gaps[b * d + i];
  return out;
}

std::vector<double> pack(const std::vector<Vec>& gaps, int d) {
  std::vector<double> out;
  out.reserve(gaps.size() * d);
  for (const auto& g : gaps) {
    if (g.size() != d) throw std::invalid_argument("gap has wrong dimension");
    for (int i = 0; i < d; ++i) out.push_back(g[i]);
  }
  return out;
}

}  // namespace

double pair_derivatives(const PairLaw& law, const Vec& r, const Vec& g, Vec* grad, Mat* hess) {
  const int d = static_cast<int>(g.size());
  return std::visit(
      overloaded{
          [&](const SpringLaw& s) {
            if (grad) *grad = s.psi * g;
            if (hess) *hess = s.psi * Mat::Identity(d, d);
            return 0.5 * s.psi * g.squaredNorm();
          },
          [&](const LennardJonesLaw& lj) {
            Vec b = r + g;
            const double L = b.norm();
            if (!(L > 0.0)) {
              if (grad || hess) throw std::domain_error("Lennard-Jones bond collapsed to zero length");
              return std::numeric_limits<double>::infinity();
            }
            const double a = lj.ell * lj.length_unit;
            const double rho = L / a;
            const double i6 = 1.0 / std::pow(rho, 6);
            const double i12 = i6 * i6;
            const double e = lj.s * (-2.0 * i6 + i12);
            if (grad || hess) {
              const double d1 = lj.s * 12.0 * (i6 - i12) / rho / a;
              if (grad) *grad = (d1 / L) * b;
              if (hess) {
                const double d2 = lj.s * (-84.0 * i6 + 156.0 * i12) / (rho * rho) / (a * a);
                Vec n = b / L;
                *hess = d2 * n * n.transpose() + (d1 / L) * (Mat::Identity(d, d) - n * n.transpose());
              }
            }
            return e;
          }},
      law);
}

double pair_energy(const PairLaw& law, const Vec& r, const Vec& g) {
  return pair_derivatives(law, r, g, nullptr, nullptr);
}

bool pair_is_quadratic(const PairLaw& law) { return std::holds_alternative<SpringLaw>(law); }

PairPotential::PairPotential(int dim, std::vector<Vec> bond_vectors, std::vector<PairLaw> laws)
    : dim_(dim), r_(std::move(bond_vectors)), laws_(std::move(laws)) {
  if (r_.size() != laws_.size()) throw std::invalid_argument("one law per bond is required");
  quadratic_ = std::all_of(laws_.begin(), laws_.end(), pair_is_quadratic);
  for (const auto& law : laws_) {
    if (const auto* s = std::get_if<SpringLaw>(&law); s && !(s->psi > 0.0))
      throw std::invalid_argument("spring constants must be positive");
    if (const auto* lj = std::get_if<LennardJonesLaw>(&law);
        lj && !(lj->s > 0.0 && lj->ell > 0.0 && lj->length_unit > 0.0))
      throw std::invalid_argument("Lennard-Jones parameters must be positive");
  }
}

double PairPotential::energy(const double* gaps) const {
  double e = 0.0;
  Vec g(dim_);
  for (int b = 0; b < bond_count(); ++b) {
    for (int i = 0; i < dim_; ++i) g[i] = gaps[b * dim_ + i];
    e += pair_energy(laws_[b], r_[b], g);
  }
  return e;
}

double PairPotential::gradient(const double* gaps, double* grad) const {
  double e = 0.0;
  Vec g(dim_), gb(dim_);
  for (int b = 0; b < bond_count(); ++b) {
    for (int i = 0; i < dim_; ++i) g[i] = gaps[b * dim_ + i];
    e += pair_derivatives(laws_[b], r_[b], g, &gb, nullptr);
    for (int i = 0; i < dim_; ++i) grad[b * dim_ + i] = gb[i];
  }
  return e;
}

void PairPotential::hessian(const double* gaps, Eigen::Ref<Eigen::MatrixXd> hess) const {
  hess.setZero();
  Vec g(dim_);
  Mat h(dim_, dim_);
  for (int b = 0; b < bond_count(); ++b) {
    for (int i = 0; i < dim_; ++i) g[i] = gaps[b * dim_ + i];
    pair_derivatives(laws_[b], r_[b], g, nullptr, &h);
    hess.block(b * dim_, b * dim_, dim_, dim_) = h;
  }
}

InteractionModel::InteractionModel(UnitCell cell, const std::vector<std::vector<Offset>>& neighbourhoods)
    : cell_(std::move(cell)) {
  if (static_cast<int>(neighbourhoods.size()) != cell_.species_count())
    throw std::invalid_argument("one neighbourhood per species is required");
  bonds_.resize(neighbourhoods.size());
  for (int a = 0; a < cell_.species_count(); ++a)
    for (const auto& r : neighbourhoods[a]) {
      if (r == Offset{}) throw std::invalid_argument("zero offset in neighbourhood");
      auto t = cell_.resolve(a, r);
      bonds_[a].push_back({r, cell_.vector(r), t.species, t.cell_shift});
    }
}

CrystalModel::CrystalModel(UnitCell cell, const std::vector<std::vector<Offset>>& neighbourhoods,
                           std::vector<std::unique_ptr<SitePotential>> potentials)
    : InteractionModel(std::move(cell), neighbourhoods), pot_(std::move(potentials)) {
  if (static_cast<int>(pot_.size()) != species_count())
    throw std::invalid_argument("one site potential per species is required");
  quadratic_ = true;
  for (int a = 0; a < species_count(); ++a) {
    if (pot_[a]->bond_count() != static_cast<int>(bonds(a).size()) || pot_[a]->dim() != dim())
      throw std::invalid_argument("site potential does not match the neighbourhood");
    quadratic_ = quadratic_ && pot_[a]->quadratic();
  }
}

namespace {

std::vector<std::vector<Offset>> square_neighbourhood() {
  return {{Offset{{1, 0}}, Offset{{0, 1}}, Offset{{1, 1}}, Offset{{-1, 1}}}};
}

}  // namespace

RandomBondModel::RandomBondModel(long n, std::uint64_t seed)
    : InteractionModel(UnitCell::simple(2), square_neighbourhood()), n_(n), seed_(seed) {
  if (n < 1) throw std::invalid_argument("grid size must be positive");
  std::mt19937_64 rng(seed);
  const long cells = n * n;
  psi_.resize(cells * kBonds);
  std::vector<Vec> r;
  for (const auto& b : bonds(0)) r.push_back(b.r);
  pot_.reserve(cells);
  for (long c = 0; c < cells; ++c) {
    std::vector<PairLaw> laws;
    for (int b = 0; b < kBonds; ++b) {
      const double u = unit_double(rng());
      const double v = b < 2 ? 0.5 + 9.5 * u : 0.1 + 4.9 * u;
      psi_[c * kBonds + b] = v;
      laws.emplace_back(SpringLaw{v});
    }
    pot_.emplace_back(2, r, std::move(laws));
  }
}

std::shared_ptr<const CrystalModel> make_pair_model(
    const UnitCell& cell, const std::vector<std::vector<std::pair<Vec, PairLaw>>>& bonds) {
  if (static_cast<int>(bonds.size()) != cell.species_count())
    throw std::invalid_argument("one bond list per species is required");
  std::vector<std::vector<Offset>> hoods;
  std::vector<std::unique_ptr<SitePotential>> pots;
  for (const auto& list : bonds) {
    std::vector<Offset> hood;
    std::vector<Vec> r;
    std::vector<PairLaw> laws;
    for (const auto& [vec, law] : list) {
      hood.push_back(cell.offset(vec));
      r.push_back(cell.vector(hood.back()));
      laws.push_back(law);
    }
    hoods.push_back(std::move(hood));
    pots.push_back(std::make_unique<PairPotential>(cell.dim(), std::move(r), std::move(laws)));
  }
  return std::make_shared<const CrystalModel>(cell, hoods, std::move(pots));
}

std::shared_ptr<const CrystalModel> make_spring_chain(const std::vector<double>& psi) {
  const int m = static_cast<int>(psi.size());
  UnitCell cell = UnitCell::uniform_chain(m);
  std::vector<std::vector<std::pair<Vec, PairLaw>>> bonds(m);
  for (int a = 0; a < m; ++a) bonds[a].push_back({Vec::Constant(1, 1.0 / m), SpringLaw{psi[a]}});
  return make_pair_model(cell, bonds);
}

std::shared_ptr<const CrystalModel> make_lennard_jones_model(const UnitCell& cell, double cutoff,
                                                             const std::vector<LennardJonesLaw>& laws) {
  if (!(cutoff >= 1.0)) throw std::invalid_argument("cutoff must be at least one lattice unit");
  if (static_cast<int>(laws.size()) != cell.species_count())
    throw std::invalid_argument("one Lennard-Jones law per species is required");
  const int d = cell.dim();
  const long reach = static_cast<long>(std::ceil(cutoff)) + 1;
  std::vector<std::vector<std::pair<Vec, PairLaw>>> bonds(cell.species_count());
  for (int a = 0; a < cell.species_count(); ++a) {
    std::vector<Vec> found;
    for (long j = (d == 2 ? -reach : 0); j <= (d == 2 ? reach : 0); ++j)
      for (long i = -reach; i <= reach; ++i)
        for (int b = 0; b < cell.species_count(); ++b) {
          Vec r = cell.shift(b) - cell.shift(a);
          r[0] += double(i);
          if (d == 2) r[1] += double(j);
          const double len = r.norm();
          if (len > 0.0 && len <= cutoff * (1.0 + 1e-12)) found.push_back(r);
        }
    std::sort(found.begin(), found.end(), [d](const Vec& x, const Vec& y) {
      for (int k = d - 1; k >= 0; --k)
        if (x[k] != y[k]) return x[k] < y[k];
      return false;
    });
    for (const auto& r : found) bonds[a].push_back({r, laws[a]});
  }
  return make_pair_model(cell, bonds);
}

DynamicsModel make_dynamics_model() {
  UnitCell cell(1, {Vec::Constant(1, 0.0), Vec::Constant(1, 0.5)});
  // Bond lengths are measured in nearest-neighbour spacings (1/m lattice units).
  const double unit = 0.5;
  auto model = make_lennard_jones_model(cell, 3.0,
                                        {LennardJonesLaw{1.6, 0.99, unit}, LennardJonesLaw{0.4, 1.01, unit}});
  return {model, {2.0, 1.0}};
}

Vec stochastic_force(const Vec& x) {
  using std::numbers::pi;
  const double c1 = std::cos(pi * x[0]), c2 = std::cos(pi * x[1]);
  const double a = 10.0 * std::exp(-c1 * c1 - c2 * c2);
  Vec f(2);
  f << a * std::sin(2.0 * pi * x[0]), a * std::sin(2.0 * pi * x[1]);
  return f;
}

StochasticModel make_stochastic_model(long n, std::uint64_t seed) {
  if (n < 1 || (n & (n - 1)) != 0) throw std::invalid_argument("grid size must be a power of two");
  auto model = std::make_shared<const RandomBondModel>(n, seed);
  auto lattice = std::make_shared<const Multilattice>(UnitCell::simple(2), n, 1.0 / double(n));
  LatticeField f(lattice);
  for (long s = 0; s < lattice->site_count(); ++s) f.at(s) = stochastic_force(lattice->position(s));
  subtract_mean(f.values(), 2);
  return {model, lattice, std::move(f)};
}

namespace {

const SitePotential& checked_potential(const InteractionModel& model, int species, std::size_t k, long cell) {
  if (species < 0 || species >= model.species_count()) throw std::invalid_argument("species out of range");
  const auto& pot = model.potential(species, cell);
  if (k != static_cast<std::size_t>(pot.bond_count())) throw std::invalid_argument("gap tuple length mismatch");
  return pot;
}

}  // namespace

double site_energy(const InteractionModel& model, int species, const std::vector<Vec>& gaps, long cell) {
  const auto& pot = checked_potential(model, species, gaps.size(), cell);
  const double e = pot.energy(pack(gaps, model.dim()).data());
  if (!std::isfinite(e)) throw std::domain_error("inadmissible gap tuple");
  return e;
}

std::vector<Vec> site_gradient(const InteractionModel& model, int species, const std::vector<Vec>& gaps,
                               long cell) {
  const auto& pot = checked_potential(model, species, gaps.size(), cell);
  auto g = pack(gaps, model.dim());
  std::vector<double> out(g.size());
  pot.gradient(g.data(), out.data());
  return unpack(out.data(), pot.bond_count(), model.dim());
}

Eigen::MatrixXd site_hessian(const InteractionModel& model, int species, const std::vector<Vec>& gaps,
                             long cell) {
  const auto& pot = checked_potential(model, species, gaps.size(), cell);
  auto g = pack(gaps, model.dim());
  Eigen::MatrixXd h(g.size(), g.size());
  pot.hessian(g.data(), h);
  return h;
}

}  // namespace hqclab
