#include "hqclab/homog.hpp"

#include "hqclab/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace hqclab {

CellProblem::CellProblem(std::shared_ptr<const InteractionModel> model)
    : model_(model),
      energy_(std::make_shared<const Multilattice>(model->unit_cell(), 1, 1.0), model) {
  if (model_->period_cells() != 0) throw std::invalid_argument("cell problems need a P-periodic model");
}

CellSolution CellProblem::solve(const Mat& F, const Eigen::VectorXd* guess) const {
  const int d = model_->dim();
  const long n = energy_.dof_count();
  const double m = double(energy_.site_count());
  if (F.rows() != d || F.cols() != d) throw std::invalid_argument("gradient has wrong size");
  Eigen::VectorXd chi = guess ? *guess : Eigen::VectorXd::Zero(n);
  if (chi.size() != n) throw std::invalid_argument("corrector guess has wrong size");

  NewtonProblem np;
  np.dim = d;
  np.energy = [&](const Eigen::VectorXd& w) { return energy_.energy(w, F); };
  np.gradient = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) { return energy_.gradient(w, F, g); };
  np.factorize = [&](const Eigen::VectorXd& w, PinnedSolver& s) {
    s.factorize(Eigen::MatrixXd(energy_.hessian(w, F)), d);
  };
  np.residual_norm = [&](const Eigen::VectorXd& g) { return std::sqrt(m * g.squaredNorm()); };
  np.threshold = 1e-12 * (1.0 + F.norm());

  CellSolution out;
  out.F = F;
  if (energy_.site_count() == 1) {
    out.chi = Eigen::VectorXd::Zero(n);
    out.energy = energy_.energy(out.chi, F);
    out.report.converged = true;
    if (!std::isfinite(out.energy)) throw SolverError("inadmissible macroscopic gradient");
    return out;
  }
  out.report = newton_minimize(np, chi, NewtonOptions{});
  out.chi = std::move(chi);
  out.energy = energy_.energy(out.chi, F);
  return out;
}

CellSolution solve_cell_problem(std::shared_ptr<const InteractionModel> model, const Mat& F,
                                const Eigen::VectorXd* guess) {
  return CellProblem(std::move(model)).solve(F, guess);
}

HomogenizedDensity::HomogenizedDensity(std::shared_ptr<const InteractionModel> model) : cell_(std::move(model)) {}

CellSolution HomogenizedDensity::cell(const Mat& F) const {
  std::vector<long long> key(F.size());
  for (int k = 0; k < F.size(); ++k) key[k] = std::llround(F.data()[k] * 1e12);
  const CellSolution* near = nullptr;
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      if (it->second.F == F) return it->second;
      near = &it->second;
    }
  }
  if (near) {
    // Same cache bucket but a different F: start from the stored corrector.
    Eigen::VectorXd guess = near->chi;
    return cell_.solve(F, &guess);
  }
  CellSolution sol = cell_.solve(F);
  std::lock_guard lock(mu_);
  cache_.emplace(std::move(key), sol);
  return sol;
}

double HomogenizedDensity::phi0(const Mat& F) const { return cell(F).energy; }

Mat HomogenizedDensity::dphi0(const Mat& F) const { return cell_.energy().stress(cell(F).chi, F); }

Eigen::MatrixXd HomogenizedDensity::d2phi0(const Mat& F) const {
  const int d = dim();
  const double h = 1e-5 * std::max(1.0, F.norm());
  Eigen::MatrixXd C(d * d, d * d);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) {
      Mat Fp = F, Fm = F;
      Fp(k, l) += h;
      Fm(k, l) -= h;
      const Mat dS = (dphi0(Fp) - dphi0(Fm)) / (2.0 * h);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) C(flat_index(i, j, d), flat_index(k, l, d)) = dS(i, j);
    }
  return 0.5 * (C + C.transpose());
}

double harmonic_mean(std::span<const double> psi) {
  if (psi.empty()) throw std::invalid_argument("harmonic mean of an empty sequence");
  double s = 0.0;
  for (double p : psi) {
    if (!(p > 0.0)) throw std::invalid_argument("harmonic mean needs positive values");
    s += 1.0 / p;
  }
  return double(psi.size()) / s;
}

double homogenized_energy(const HomogenizedDensity& density, const P1Field& u) {
  const auto& M = u.mesh();
  double e = 0.0;
  for (long t = 0; t < M.element_count(); ++t) e += M.element_measure(t) * density.phi0(element_gradient(u, t));
  return e;
}

Eigen::VectorXd homogenized_gradient(const HomogenizedDensity& density, const P1Field& u) {
  const auto& M = u.mesh();
  const int d = M.dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.values().size());
  for (long t = 0; t < M.element_count(); ++t) {
    const Mat S = density.dphi0(element_gradient(u, t));
    const auto G = M.basis_gradients(t);
    for (int a = 0; a <= d; ++a) g.segment(M.node(t, a) * d, d) += M.element_measure(t) * S * G.row(a).transpose();
  }
  return g;
}

HomogenizedFemResult solve_homogenized_fem(std::shared_ptr<const MacroMesh> mesh, const HomogenizedDensity& density,
                                           const Eigen::VectorXd& load, const NewtonOptions& options) {
  const int d = mesh->dim();
  if (load.size() != mesh->node_count() * d) throw std::invalid_argument("load vector has wrong size");
  if (average_dofs(load, d).norm() > 1e-12 * std::max(1.0, load.lpNorm<Eigen::Infinity>()))
    throw std::invalid_argument("load must have zero mean");

  NewtonProblem np;
  np.dim = d;
  np.energy = [&](const Eigen::VectorXd& w) {
    return homogenized_energy(density, P1Field(mesh, w)) - load.dot(w);
  };
  np.gradient = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    P1Field u(mesh, w);
    g = homogenized_gradient(density, u) - load;
    return homogenized_energy(density, u) - load.dot(w);
  };
  np.factorize = [&](const Eigen::VectorXd& w, PinnedSolver& s) {
    P1Field u(mesh, w);
    std::vector<Eigen::Triplet<double>> trip;
    for (long t = 0; t < mesh->element_count(); ++t) {
      const Eigen::MatrixXd C = density.d2phi0(element_gradient(u, t));
      const auto G = mesh->basis_gradients(t);
      const double wt = mesh->element_measure(t);
      for (int a = 0; a <= d; ++a)
        for (int b = 0; b <= d; ++b)
          for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) {
              double v = 0.0;
              for (int j = 0; j < d; ++j)
                for (int l = 0; l < d; ++l) v += C(flat_index(i, j, d), flat_index(k, l, d)) * G(a, j) * G(b, l);
              trip.emplace_back(mesh->node(t, a) * d + i, mesh->node(t, b) * d + k, wt * v);
            }
    }
    Eigen::SparseMatrix<double> K(w.size(), w.size());
    K.setFromTriplets(trip.begin(), trip.end());
    s.factorize(K, d);
  };
  np.residual_norm = [](const Eigen::VectorXd& g) { return g.norm(); };
  np.threshold = options.tol * load.norm();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(load.size());
  NewtonReport rep = newton_minimize(np, w, options);
  return {P1Field(mesh, std::move(w)), std::move(rep)};
}

}  // namespace hqclab
