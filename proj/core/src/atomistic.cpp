#include "hqclab/atomistic.hpp"

#include "hqclab/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <stdexcept>

namespace hqclab {

namespace {

const Mat zero_gradient(int d) { return Mat::Zero(d, d); }

void check_field(const EquilibriumProblem& p, const LatticeField& u) {
  if (!(u.lattice() == *p.lattice())) throw std::invalid_argument("field does not live on the problem lattice");
}

}  // namespace

EquilibriumProblem::EquilibriumProblem(std::shared_ptr<const Multilattice> lattice,
                                       std::shared_ptr<const InteractionModel> model)
    : EquilibriumProblem(lattice, model, LatticeField(lattice)) {}

EquilibriumProblem::EquilibriumProblem(std::shared_ptr<const Multilattice> lattice,
                                       std::shared_ptr<const InteractionModel> model, LatticeField force)
    : lattice_(std::move(lattice)), model_(std::move(model)), force_(std::move(force)) {
  if (!(force_.lattice() == *lattice_)) throw std::invalid_argument("force does not live on the lattice");
  const double scale = force_.values().size() ? force_.values().lpNorm<Eigen::Infinity>() : 0.0;
  if (average(force_).norm() > 1e-12 * std::max(1.0, scale)) throw std::invalid_argument("force must have zero mean");
  energy_ = std::make_shared<const LatticeEnergy>(lattice_, model_);
}

double total_energy(const EquilibriumProblem& p, const LatticeField& u) {
  check_field(p, u);
  const double e = p.energy().energy(u.values(), zero_gradient(u.dim()));
  if (!std::isfinite(e)) throw std::domain_error("inadmissible displacement (collapsed bond)");
  return e;
}

double total_potential(const EquilibriumProblem& p, const LatticeField& u) {
  return total_energy(p, u) - inner_product(p.force(), u);
}

LatticeField energy_gradient(const EquilibriumProblem& p, const LatticeField& u) {
  check_field(p, u);
  Eigen::VectorXd g;
  if (!std::isfinite(p.energy().gradient(u.values(), zero_gradient(u.dim()), g)))
    throw std::domain_error("inadmissible displacement (collapsed bond)");
  return LatticeField(u.lattice_ptr(), g * double(u.site_count()));
}

Eigen::SparseMatrix<double> energy_hessian(const EquilibriumProblem& p, const LatticeField& u) {
  check_field(p, u);
  return p.energy().hessian(u.values(), zero_gradient(u.dim())) * double(u.site_count());
}

EquilibriumResult solve_equilibrium(const EquilibriumProblem& p, const LatticeField& guess,
                                    const NewtonOptions& options) {
  check_field(p, guess);
  const auto& E = p.energy();
  const int d = guess.dim();
  const double N = double(guess.site_count());
  const Mat F = zero_gradient(d);
  const Eigen::VectorXd f = p.force().values();
  const double f_l2 = std::sqrt(f.squaredNorm() / N);

  NewtonProblem np;
  np.dim = d;
  np.energy = [&](const Eigen::VectorXd& w) { return E.energy(w, F) - f.dot(w) / N; };
  np.gradient = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    const double e = E.gradient(w, F, g);
    g -= f / N;
    return e - f.dot(w) / N;
  };
  np.factorize = [&](const Eigen::VectorXd& w, PinnedSolver& s) { s.factorize(E.hessian(w, F), d); };
  // Riesz residual N g in the averaged L2 norm.
  np.residual_norm = [&](const Eigen::VectorXd& g) { return std::sqrt(N * g.squaredNorm()); };
  np.threshold = options.tol * (1.0 + f_l2);

  Eigen::VectorXd w = guess.values();
  NewtonReport rep = newton_minimize(np, w, options);
  return {LatticeField(guess.lattice_ptr(), std::move(w)), std::move(rep)};
}

Eigen::VectorXd site_masses(const Multilattice& lattice, const std::vector<double>& species_masses) {
  if (static_cast<int>(species_masses.size()) != lattice.species_count())
    throw std::invalid_argument("one mass per species is required");
  Eigen::VectorXd m(lattice.site_count());
  for (long s = 0; s < lattice.site_count(); ++s) {
    m[s] = species_masses[lattice.site_species(s)];
    if (!(m[s] > 0.0)) throw std::invalid_argument("masses must be positive");
  }
  return m;
}

Eigenmode slowest_eigenmode(const EquilibriumProblem& p, const LatticeField& u_eq, const Eigen::VectorXd& masses,
                            double tol, int max_iterations) {
  check_field(p, u_eq);
  const int d = u_eq.dim();
  const long sites = u_eq.site_count();
  const long n = sites * d;
  if (masses.size() != sites || masses.minCoeff() <= 0.0) throw std::invalid_argument("masses must be positive, one per site");

  Eigen::VectorXd M(n);
  for (long s = 0; s < sites; ++s) M.segment(s * d, d).setConstant(masses[s]);
  const double total_mass = masses.sum();

  const Eigen::SparseMatrix<double> H = energy_hessian(p, u_eq);
  PinnedSolver solver;
  solver.factorize(H, d);
  double h_norm = 0.0;
  {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < H.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it) rows[it.row()] += std::abs(it.value());
    h_norm = rows.maxCoeff();
  }

  // Remove the M-weighted mean so that vectors stay M-orthogonal to translations.
  auto deflate = [&](Eigen::Ref<Eigen::VectorXd> v) {
    for (int i = 0; i < d; ++i) {
      double c = 0.0;
      for (long s = 0; s < sites; ++s) c += masses[s] * v[s * d + i];
      c /= total_mass;
      for (long s = 0; s < sites; ++s) v[s * d + i] -= c;
    }
  };

  const int block = static_cast<int>(std::min<long>(3, n - d));
  if (block < 1) throw std::invalid_argument("no non-translational modes");
  Eigen::MatrixXd V(n, block);
  std::mt19937_64 rng(0x5eed);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < block; ++j) V(i, j) = unit_double(rng()) - 0.5;
  for (int j = 0; j < block; ++j) deflate(V.col(j));

  double lambda = 0.0;
  Eigen::VectorXd v;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd X(n, block);
    for (int j = 0; j < block; ++j) {
      X.col(j) = solver.solve(M.cwiseProduct(V.col(j)));
      deflate(X.col(j));
    }
    const Eigen::MatrixXd HX = H * X;
    const Eigen::MatrixXd A = X.transpose() * HX;
    const Eigen::MatrixXd B = X.transpose() * M.asDiagonal() * X;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (A + A.transpose()), 0.5 * (B + B.transpose()));
    if (ritz.info() != Eigen::Success) throw SolverError("Rayleigh-Ritz step failed");
    V = X * ritz.eigenvectors();
    lambda = ritz.eigenvalues()[0];
    v = V.col(0);
    const Eigen::VectorXd res = H * v - lambda * M.cwiseProduct(v);
    const double rel = res.norm() / (std::abs(lambda) * M.cwiseProduct(v).norm());
    if (rel <= tol || res.norm() <= 1e-13 * h_norm * v.norm()) {
      const double norm = std::sqrt(v.dot(M.cwiseProduct(v)) / double(sites));
      v /= norm;
      const double big = v.lpNorm<Eigen::Infinity>();
      for (long i = 0; i < n; ++i)
        if (std::abs(v[i]) > 1e-8 * big) {
          if (v[i] < 0.0) v = -v;
          break;
        }
      return {LatticeField(u_eq.lattice_ptr(), v), lambda, it};
    }
    for (int j = 0; j < block; ++j) V.col(j).normalize();
  }
  throw SolverError("eigen-iteration did not converge");
}

}  // namespace hqclab
