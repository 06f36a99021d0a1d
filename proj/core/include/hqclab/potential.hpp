#pragma once

#include "hqclab/lattice.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

namespace hqclab {

/// psi/2 |g|^2
struct SpringLaw {
  double psi = 1.0;
};

/// s(-2 rho^-6 + rho^-12) with rho = |r + g| / (ell * length_unit).
struct LennardJonesLaw {
  double s = 1.0;
  double ell = 1.0;
  double length_unit = 1.0;
};

using PairLaw = std::variant<SpringLaw, LennardJonesLaw>;

/// Energy of one bond with reference vector r and gap g = D_r u. Returns +inf
/// for a collapsed Lennard-Jones bond.
double pair_energy(const PairLaw& law, const Vec& r, const Vec& g);
/// Energy, gradient and Hessian of one bond with respect to g.
double pair_derivatives(const PairLaw& law, const Vec& r, const Vec& g, Vec* grad, Mat* hess);
bool pair_is_quadratic(const PairLaw& law);

/// Site energy V(g_1, ..., g_k) of a tuple of gaps, stored bond-major
/// (k * d doubles).
class SitePotential {
 public:
  virtual ~SitePotential() = default;
  virtual int dim() const = 0;
  virtual int bond_count() const = 0;
  virtual bool quadratic() const = 0;
  /// True if the Hessian is block diagonal over bonds.
  virtual bool separable() const = 0;

  /// May return +inf on an inadmissible tuple.
  virtual double energy(const double* gaps) const = 0;
  /// Writes k*d gradient entries; returns the energy.
  virtual double gradient(const double* gaps, double* grad) const = 0;
  /// Fills the (k d) x (k d) Hessian.
  virtual void hessian(const double* gaps, Eigen::Ref<Eigen::MatrixXd> hess) const = 0;
};

/// Sum of pair terms over the bonds of one site.
class PairPotential final : public SitePotential {
 public:
  PairPotential(int dim, std::vector<Vec> bond_vectors, std::vector<PairLaw> laws);

  int dim() const override { return dim_; }
  int bond_count() const override { return static_cast<int>(r_.size()); }
  bool quadratic() const override { return quadratic_; }
  bool separable() const override { return true; }
  double energy(const double* gaps) const override;
  double gradient(const double* gaps, double* grad) const override;
  void hessian(const double* gaps, Eigen::Ref<Eigen::MatrixXd> hess) const override;

  const std::vector<PairLaw>& laws() const { return laws_; }

 private:
  int dim_;
  std::vector<Vec> r_;
  std::vector<PairLaw> laws_;
  bool quadratic_;
};

/// A bond of a species' neighbourhood, resolved against the unit cell.
struct Bond {
  Offset offset;
  Vec r;
  int target_species;
  IVec cell_shift;
};

/// Per-species neighbourhoods and site potentials on a periodic unit cell.
class InteractionModel {
 public:
  InteractionModel(UnitCell cell, const std::vector<std::vector<Offset>>& neighbourhoods);
  virtual ~InteractionModel() = default;

  const UnitCell& unit_cell() const { return cell_; }
  int dim() const { return cell_.dim(); }
  int species_count() const { return cell_.species_count(); }
  const std::vector<Bond>& bonds(int species) const { return bonds_[species]; }

  /// Site potential of `species` in the Bravais cell with the given global
  /// index; P-periodic models ignore the cell.
  virtual const SitePotential& potential(int species, long global_cell = 0) const = 0;
  virtual bool quadratic() const = 0;
  /// Cells per side of the global periodic pattern, or 0 if the model is P-periodic.
  virtual long period_cells() const { return 0; }

 private:
  UnitCell cell_;
  std::vector<std::vector<Bond>> bonds_;
};

/// P-periodic model: one site potential per species.
class CrystalModel final : public InteractionModel {
 public:
  CrystalModel(UnitCell cell, const std::vector<std::vector<Offset>>& neighbourhoods,
               std::vector<std::unique_ptr<SitePotential>> potentials);

  const SitePotential& potential(int species, long = 0) const override { return *pot_[species]; }
  bool quadratic() const override { return quadratic_; }

 private:
  std::vector<std::unique_ptr<SitePotential>> pot_;
  bool quadratic_;
};

/// Random harmonic bond network on a simple square lattice of n x n cells.
class RandomBondModel final : public InteractionModel {
 public:
  static constexpr int kBonds = 4;
  RandomBondModel(long n, std::uint64_t seed);

  const SitePotential& potential(int, long global_cell) const override { return pot_[global_cell]; }
  bool quadratic() const override { return true; }
  long period_cells() const override { return n_; }

  /// Strength of bond b at the given cell, bonds ordered (1,0), (0,1), (1,1), (-1,1).
  double strength(long cell, int bond) const { return psi_[cell * kBonds + bond]; }
  std::uint64_t seed() const { return seed_; }

 private:
  long n_;
  std::uint64_t seed_;
  std::vector<double> psi_;
  std::vector<PairPotential> pot_;
};

/// Model built from explicit per-species pair bonds (r, law).
std::shared_ptr<const CrystalModel> make_pair_model(
    const UnitCell& cell, const std::vector<std::vector<std::pair<Vec, PairLaw>>>& bonds);

/// 1D chain with uniform period of m = psi.size() species; species a owns the
/// bond to the next site with stiffness psi[a].
std::shared_ptr<const CrystalModel> make_spring_chain(const std::vector<double>& psi);

/// Lennard-Jones model with all sites within `cutoff` (lattice units) as
/// neighbours; parameters keyed on the species owning the site.
std::shared_ptr<const CrystalModel> make_lennard_jones_model(const UnitCell& cell, double cutoff,
                                                             const std::vector<LennardJonesLaw>& laws);

struct DynamicsModel {
  std::shared_ptr<const CrystalModel> model;
  std::vector<double> species_masses;
};
/// Two-species Lennard-Jones chain with masses (2, 1) on P = {0, 1/2}.
DynamicsModel make_dynamics_model();

struct StochasticModel {
  std::shared_ptr<const RandomBondModel> model;
  std::shared_ptr<const Multilattice> lattice;
  LatticeField force;
};
/// Random bond network with n x n sites and the zero-mean smooth load.
StochasticModel make_stochastic_model(long n, std::uint64_t seed);
/// Load before mean subtraction.
Vec stochastic_force(const Vec& x);

/// Uniform double in [0,1) from a 64-bit draw; portable across standard libraries.
inline double unit_double(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

double site_energy(const InteractionModel& model, int species, const std::vector<Vec>& gaps, long cell = 0);
std::vector<Vec> site_gradient(const InteractionModel& model, int species, const std::vector<Vec>& gaps,
                               long cell = 0);
/// Block (b, c) of size d x d holds V''_{b c}.
Eigen::MatrixXd site_hessian(const InteractionModel& model, int species, const std::vector<Vec>& gaps,
                             long cell = 0);

}  // namespace hqclab
