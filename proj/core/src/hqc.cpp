#include "hqclab/hqc.hpp"

#include "hqclab/errors.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hqclab {

namespace {

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

long floor_mod(long a, long b) { return a - floor_div(a, b) * b; }

Eigen::VectorXd flatten(const Mat& F) {
  Eigen::VectorXd v(F.size());
  for (int j = 0; j < F.cols(); ++j)
    for (int i = 0; i < F.rows(); ++i) v[flat_index(i, j, int(F.rows()))] = F(i, j);
  return v;
}

Mat unflatten(const Eigen::VectorXd& v, int d) {
  Mat F(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) F(i, j) = v[flat_index(i, j, d)];
  return F;
}

}  // namespace

Vec SamplingDomain::position(long site) const {
  const auto& L = *lattice;
  Vec x = L.unit_cell().shift(L.site_species(site));
  IVec c = L.site_cell(site);
  for (int i = 0; i < L.dim(); ++i) x[i] = (x[i] + double(c[i] + origin[i])) * L.spacing();
  return x;
}

long SamplingDomain::global_site(const Multilattice& global, long site) const {
  const auto& L = *lattice;
  IVec c = L.site_cell(site);
  for (int i = 0; i < L.dim(); ++i) c[i] += origin[i];
  return global.site_index(c, L.site_species(site));
}

std::vector<SamplingDomain> place_sampling_domains(const MacroMesh& mesh, const Multilattice& lattice, long cells) {
  check_alignment(mesh, lattice);
  const long N = lattice.cells_per_side();
  if (cells < 1 || cells > N) throw std::invalid_argument("sampling block size must lie in [1, cells per side]");
  if (N / mesh.cells_per_side() < 1) throw std::invalid_argument("element too small to hold a period");
  auto block = std::make_shared<const Multilattice>(lattice.unit_cell(), cells, lattice.spacing());
  std::vector<SamplingDomain> out;
  out.reserve(mesh.element_count());
  for (long e = 0; e < mesh.element_count(); ++e) {
    SamplingDomain D;
    D.element = e;
    D.cells = cells;
    D.lattice = block;
    const Vec b = mesh.barycenter(e);
    for (int i = 0; i < mesh.dim(); ++i) {
      const double t = b[i] * double(N);
      D.representative[i] = static_cast<long>(std::ceil(t - 0.5 - 1e-9));
      D.origin[i] = cells == N ? 0 : D.representative[i] - cells / 2;
    }
    out.push_back(std::move(D));
  }
  return out;
}

MicroProblem::MicroProblem(std::shared_ptr<const InteractionModel> model, const SamplingDomain& domain)
    : energy_(domain.lattice, std::move(model), domain.origin) {}

MicroProblem::Result MicroProblem::solve(const Mat& F, const Eigen::VectorXd* guess, double tol) const {
  const int d = dim();
  Result out;
  if (energy_.quadratic()) {
    const auto& S = linear_sensitivities();
    const Eigen::VectorXd f = flatten(F);
    out.corrector = Eigen::VectorXd::Zero(energy_.dof_count());
    for (int k = 0; k < d * d; ++k) out.corrector += f[k] * S[k];
    out.report.converged = true;
    out.report.iterations = 1;
    return out;
  }
  const double N = double(energy_.site_count());
  NewtonProblem np;
  np.dim = d;
  np.energy = [&](const Eigen::VectorXd& w) { return energy_.energy(w, F); };
  np.gradient = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) { return energy_.gradient(w, F, g); };
  np.factorize = [&](const Eigen::VectorXd& w, PinnedSolver& s) { s.factorize(energy_.hessian(w, F), d); };
  np.residual_norm = [&](const Eigen::VectorXd& g) { return std::sqrt(N * g.squaredNorm()); };
  np.threshold = tol * (1.0 + F.norm());
  out.corrector = guess ? *guess : Eigen::VectorXd::Zero(energy_.dof_count());
  if (out.corrector.size() != energy_.dof_count()) throw std::invalid_argument("corrector guess has wrong size");
  if (energy_.site_count() == 1) {
    out.corrector.setZero();
    out.report.converged = true;
    return out;
  }
  out.report = newton_minimize(np, out.corrector, NewtonOptions{tol, 50, 40});
  return out;
}

std::vector<Eigen::VectorXd> MicroProblem::sensitivities(const Eigen::VectorXd& U, const Mat& F) const {
  const int d = dim();
  std::vector<Eigen::VectorXd> out(d * d, Eigen::VectorXd::Zero(energy_.dof_count()));
  if (energy_.site_count() == 1) return out;
  PinnedSolver solver;
  solver.factorize(energy_.hessian(U, F), d);
  const Eigen::MatrixXd B = energy_.mixed(U, F);
  for (int k = 0; k < d * d; ++k) {
    out[k] = -solver.solve(B.col(k));
    subtract_mean(out[k], d);
  }
  return out;
}

Eigen::MatrixXd MicroProblem::tangent(const Eigen::VectorXd& U, const Mat& F,
                                      const std::vector<Eigen::VectorXd>& sens) const {
  const int d = dim();
  Eigen::MatrixXd C = energy_.tangent(U, F);
  if (energy_.site_count() > 1) {
    const Eigen::MatrixXd B = energy_.mixed(U, F);
    for (int k = 0; k < d * d; ++k) C.col(k) += B.transpose() * sens[k];
  }
  return 0.5 * (C + C.transpose());
}

const std::vector<Eigen::VectorXd>& MicroProblem::linear_sensitivities() const {
  std::call_once(linear_once_, [this] {
    const int d = dim();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(energy_.dof_count());
    const Mat F0 = Mat::Zero(d, d);
    lin_sens_ = sensitivities(zero, F0);
    lin_tangent_ = tangent(zero, F0, lin_sens_);
  });
  return lin_sens_;
}

const Eigen::MatrixXd& MicroProblem::linear_tangent() const {
  linear_sensitivities();
  return lin_tangent_;
}

const Eigen::MatrixXd& MicroProblem::affine_tangent() const {
  std::call_once(affine_once_, [this] {
    const int d = dim();
    affine_tangent_ = energy_.tangent(Eigen::VectorXd::Zero(energy_.dof_count()), Mat::Zero(d, d));
  });
  return affine_tangent_;
}

HqcSolver::HqcSolver(std::shared_ptr<const InteractionModel> model, std::shared_ptr<const Multilattice> lattice,
                     std::shared_ptr<const MacroMesh> mesh, HqcOptions options, long sampling_cells)
    : model_(std::move(model)), lattice_(std::move(lattice)), mesh_(std::move(mesh)), options_(options) {
  if (!(model_->unit_cell() == lattice_->unit_cell())) throw std::invalid_argument("model and lattice differ");
  if (!(options_.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const long period = model_->period_cells();
  if (period > 0 && period != lattice_->cells_per_side())
    throw std::invalid_argument("random model and lattice sizes differ");
  domains_ = place_sampling_domains(*mesh_, *lattice_, sampling_cells);
  std::map<IVec, std::shared_ptr<const MicroProblem>> shared;
  for (const auto& D : domains_) {
    IVec key{0, 0};
    if (period > 0)
      for (int i = 0; i < lattice_->dim(); ++i) key[i] = floor_mod(D.origin[i], period);
    auto& slot = shared[key];
    if (!slot) slot = std::make_shared<const MicroProblem>(model_, D);
    micro_.push_back(slot);
  }
  states_.resize(domains_.size());
  fresh_.assign(domains_.size(), true);
}

void HqcSolver::reset() { fresh_.assign(domains_.size(), true); }

void HqcSolver::update_element(long e, const Mat& F) {
  const MicroProblem& P = *micro_[e];
  const auto& E = P.energy();
  const int d = P.dim();
  MicroState st;
  st.F = F;
  const Eigen::VectorXd f = flatten(F);
  if (E.quadratic()) {
    st.tangent = options_.relax ? P.linear_tangent() : P.affine_tangent();
    const Eigen::VectorXd s = st.tangent * f;
    st.energy = 0.5 * f.dot(s);
    st.stress = unflatten(s, d);
    st.report.converged = true;
    st.report.iterations = 1;
  } else if (!options_.relax) {
    st.corrector = Eigen::VectorXd::Zero(E.dof_count());
    st.energy = E.energy(st.corrector, F);
    if (!std::isfinite(st.energy)) throw SolverError("inadmissible element gradient", {}, e);
    st.stress = E.stress(st.corrector, F);
    st.tangent = E.tangent(st.corrector, F);
    st.report.converged = true;
  } else {
    const Eigen::VectorXd* guess = fresh_[e] ? nullptr : &states_[e].corrector;
    MicroProblem::Result r;
    try {
      r = P.solve(F, guess, options_.tol * options_.inner_factor);
    } catch (const SolverError& err) {
      std::ostringstream msg;
      msg << "micro solve failed on element " << e << ": " << err.what();
      throw SolverError(msg.str(), err.residual_history(), e);
    }
    st.corrector = std::move(r.corrector);
    st.report = std::move(r.report);
    st.energy = E.energy(st.corrector, F);
    st.stress = E.stress(st.corrector, F);
    const auto sens = P.sensitivities(st.corrector, F);
    st.tangent = P.tangent(st.corrector, F, sens);
    if (options_.check_stability && E.site_count() > 1) {
      PinnedSolver s;
      s.factorize(E.hessian(st.corrector, F), d);
      st.stable = s.positive_definite();
    }
  }
  states_[e] = std::move(st);
}

void HqcSolver::update(const P1Field& u) {
  if (u.mesh_ptr() != mesh_ && !(u.mesh().dim() == mesh_->dim() && u.mesh().cells_per_side() == mesh_->cells_per_side()))
    throw std::invalid_argument("field lives on a different mesh");
  parallel_for(mesh_->element_count(), options_.threads, [&](long e) { update_element(e, element_gradient(u, e)); });
  fresh_.assign(domains_.size(), false);
}

double HqcSolver::energy() const {
  double e = 0.0;
  for (long t = 0; t < mesh_->element_count(); ++t) e += mesh_->element_measure(t) * states_[t].energy;
  return e;
}

Eigen::VectorXd HqcSolver::gradient() const {
  const int d = mesh_->dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(mesh_->node_count() * d);
  for (long t = 0; t < mesh_->element_count(); ++t) {
    const auto G = mesh_->basis_gradients(t);
    for (int a = 0; a <= d; ++a)
      g.segment(mesh_->node(t, a) * d, d) += mesh_->element_measure(t) * states_[t].stress * G.row(a).transpose();
  }
  return g;
}

Eigen::VectorXd HqcSolver::gradient_with_sensitivities() const {
  const int d = mesh_->dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(mesh_->node_count() * d);
  for (long t = 0; t < mesh_->element_count(); ++t) {
    const MicroProblem& P = *micro_[t];
    const auto& st = states_[t];
    const Eigen::VectorXd U = corrector(t);
    Eigen::VectorXd gU;
    P.energy().gradient(U, st.F, gU);
    std::vector<Eigen::VectorXd> sens =
        options_.relax ? P.sensitivities(U, st.F)
                       : std::vector<Eigen::VectorXd>(d * d, Eigen::VectorXd::Zero(U.size()));
    const Mat S = P.energy().stress(U, st.F);
    Mat total = S;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) total(i, j) += gU.dot(sens[flat_index(i, j, d)]);
    const auto G = mesh_->basis_gradients(t);
    for (int a = 0; a <= d; ++a)
      g.segment(mesh_->node(t, a) * d, d) += mesh_->element_measure(t) * total * G.row(a).transpose();
  }
  return g;
}

Eigen::SparseMatrix<double> HqcSolver::hessian() const {
  const int d = mesh_->dim();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh_->element_count() * (d + 1) * (d + 1) * d * d);
  for (long t = 0; t < mesh_->element_count(); ++t) {
    const auto G = mesh_->basis_gradients(t);
    const Eigen::MatrixXd& C = states_[t].tangent;
    const double w = mesh_->element_measure(t);
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b)
        for (int i = 0; i < d; ++i)
          for (int k = 0; k < d; ++k) {
            double v = 0.0;
            for (int j = 0; j < d; ++j)
              for (int l = 0; l < d; ++l) v += C(flat_index(i, j, d), flat_index(k, l, d)) * G(a, j) * G(b, l);
            trip.emplace_back(mesh_->node(t, a) * d + i, mesh_->node(t, b) * d + k, w * v);
          }
  }
  const long n = mesh_->node_count() * d;
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

Eigen::VectorXd HqcSolver::rhs(const LatticeField& f) const {
  if (!(f.lattice() == *lattice_)) throw std::invalid_argument("load does not live on the lattice");
  const int d = mesh_->dim();
  const double eps = lattice_->spacing();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh_->node_count() * d);
  if (options_.load == LoadMode::Lattice) {
    const double w = 1.0 / double(lattice_->site_count());
    const long n = mesh_->cells_per_side();
    for (long s = 0; s < lattice_->site_count(); ++s) {
      const SiteOwner o = site_owner(*mesh_, *lattice_, s);
      const auto G = mesh_->basis_gradients(o.element);
      const IVec v0 = mesh_->vertex(o.element, 0);
      Vec x = lattice_->position(s);
      for (int i = 0; i < d; ++i) x[i] += double(o.image[i]) - double(v0[i]) / double(n);
      for (int a = 0; a <= d; ++a) {
        const double lambda = (a == 0 ? 1.0 : 0.0) + G.row(a).dot(x.transpose());
        b.segment(mesh_->node(o.element, a) * d, d) += w * lambda * f.at(s);
      }
    }
    return b;
  }
  for (long t = 0; t < mesh_->element_count(); ++t) {
    const auto& D = domains_[t];
    const auto G = mesh_->basis_gradients(t);
    const IVec v0 = mesh_->vertex(t, 0);
    Vec x0(d);
    for (int i = 0; i < d; ++i) x0[i] = double(v0[i]) / double(mesh_->cells_per_side());
    auto add = [&](const Vec& x, const Vec& fx, double weight) {
      for (int a = 0; a <= d; ++a) {
        const double lambda = (a == 0 ? 1.0 : 0.0) + G.row(a).dot((x - x0).transpose());
        b.segment(mesh_->node(t, a) * d, d) += weight * lambda * fx;
      }
    };
    const double w = mesh_->element_measure(t);
    if (options_.load == LoadMode::Representative) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = double(D.representative[i]) * eps;
      add(x, f.at(lattice_->site_index(D.representative, 0)), w);
    } else {
      const long n = D.lattice->site_count();
      for (long s = 0; s < n; ++s) add(D.position(s), f.at(D.global_site(*lattice_, s)), w / double(n));
    }
  }
  return b;
}

HqcSolution HqcSolver::solve(const LatticeField& f, const P1Field* guess) {
  const int d = mesh_->dim();
  // Quadrature of a zero-mean load need not be orthogonal to constants; drop
  // the incompatible part so the pinned problem has a stationary point.
  Eigen::VectorXd b = rhs(f);
  subtract_mean(b, d);
  NewtonProblem np;
  np.dim = d;
  np.energy = [&](const Eigen::VectorXd& w) {
    try {
      update(P1Field(mesh_, w));
    } catch (const SolverError&) {
      return std::numeric_limits<double>::infinity();
    }
    return energy() - b.dot(w);
  };
  np.gradient = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    update(P1Field(mesh_, w));
    g = gradient() - b;
    return energy() - b.dot(w);
  };
  np.factorize = [&](const Eigen::VectorXd&, PinnedSolver& s) { s.factorize(hessian(), d); };
  np.residual_norm = [](const Eigen::VectorXd& g) { return g.norm(); };
  np.threshold = options_.tol * b.norm();
  Eigen::VectorXd w = guess ? guess->values() : Eigen::VectorXd::Zero(b.size());
  NewtonReport rep = newton_minimize(np, w, NewtonOptions{options_.tol, options_.max_iterations, 40});
  P1Field u(mesh_, std::move(w));
  update(u);
  return {std::move(u), std::move(rep)};
}

Eigen::VectorXd HqcSolver::corrector(long e) const {
  const MicroProblem& P = *micro_[e];
  const auto& st = states_[e];
  if (!options_.relax) return Eigen::VectorXd::Zero(P.energy().dof_count());
  if (!P.energy().quadratic()) return st.corrector;
  const int d = P.dim();
  const auto& S = P.linear_sensitivities();
  const Eigen::VectorXd f = flatten(st.F);
  Eigen::VectorXd U = Eigen::VectorXd::Zero(P.energy().dof_count());
  for (int k = 0; k < d * d; ++k) U += f[k] * S[k];
  return U;
}

SiteOwner site_owner(const MacroMesh& mesh, const Multilattice& lattice, long site) {
  const int d = mesh.dim();
  const long q = lattice.unit_cell().denominator();
  const long N = lattice.cells_per_side();
  const long n = mesh.cells_per_side();
  const long L = N * q / n;  // element side in units of eps / q
  const IVec c = lattice.site_cell(site);
  const IVec& p = lattice.unit_cell().shift_numerator(lattice.site_species(site));
  IVec X{0, 0};
  for (int i = 0; i < d; ++i) X[i] = c[i] * q + p[i];

  if (d == 1) {
    const long e = X[0] / L;
    if (X[0] % L == 0 && e >= 1) return {e - 1, {0, 0}};
    return {e, {0, 0}};
  }

  const long i0 = X[0] / L, j0 = X[1] / L;
  bool found = false;
  long best_e = 0;
  IVec best_key{0, 0}, best_image{0, 0};
  for (long i = (X[0] % L == 0 ? i0 - 1 : i0); i <= i0; ++i)
    for (long j = (X[1] % L == 0 ? j0 - 1 : j0); j <= j0; ++j) {
      const long a = X[0] - i * L, b = X[1] - j * L;
      const long iw = floor_mod(i, n), jw = floor_mod(j, n);
      const IVec image{i < 0 ? 1 : 0, j < 0 ? 1 : 0};
      for (int t = 0; t < 2; ++t) {
        const bool inside = t == 0 ? (a + b <= L) : (a + b >= L);
        if (!inside) continue;
        const IVec key{3 * iw + 1 + t, 3 * jw + 1 + t};
        if (!found || key < best_key) {
          found = true;
          best_key = key;
          best_e = 2 * (iw + n * jw) + t;
          best_image = image;
        }
      }
    }
  return {best_e, best_image};
}

LatticeField HqcSolver::reconstruct(const P1Field& u) {
  update(u);
  const auto& L = *lattice_;
  const int d = L.dim();
  const long N = L.cells_per_side();
  std::vector<std::vector<std::pair<long, IVec>>> by_element(mesh_->element_count());
  for (long s = 0; s < L.site_count(); ++s) {
    auto o = site_owner(*mesh_, L, s);
    by_element[o.element].emplace_back(s, o.image);
  }
  LatticeField out(lattice_);
  for (long e = 0; e < mesh_->element_count(); ++e) {
    if (by_element[e].empty()) continue;
    const AffineMap A = affine_extension(u, e);
    const Eigen::VectorXd U = corrector(e);
    const auto& D = domains_[e];
    const auto& B = *D.lattice;
    for (const auto& [s, image] : by_element[e]) {
      Vec x = L.position(s);
      IVec c = L.site_cell(s);
      for (int i = 0; i < d; ++i) {
        x[i] += double(image[i]);
        c[i] += image[i] * N - D.origin[i];
      }
      const long local = B.site_index(c, L.site_species(s));
      out.at(s) = A(x) + U.segment(local * d, d);
    }
  }
  return out;
}

MicroState micro_solve(const MicroProblem& problem, const AffineMap& u_lin, const Eigen::VectorXd* guess, double tol) {
  const Mat& F = u_lin.gradient;
  auto r = problem.solve(F, guess, tol);
  MicroState st;
  st.F = F;
  st.corrector = std::move(r.corrector);
  st.report = std::move(r.report);
  st.energy = problem.energy().energy(st.corrector, F);
  st.stress = problem.energy().stress(st.corrector, F);
  st.tangent = problem.tangent(st.corrector, F, problem.sensitivities(st.corrector, F));
  return st;
}

std::vector<Eigen::VectorXd> micro_sensitivity(const MicroProblem& problem, const MicroState& state,
                                               const Eigen::MatrixXd& basis_gradients) {
  const int d = problem.dim();
  const auto S = problem.sensitivities(state.corrector, state.F);
  std::vector<Eigen::VectorXd> out;
  for (int a = 0; a < basis_gradients.rows(); ++a)
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(problem.energy().dof_count());
      for (int j = 0; j < d; ++j) v += basis_gradients(a, j) * S[flat_index(i, j, d)];
      out.push_back(std::move(v));
    }
  return out;
}

double hqc_energy(HqcSolver& solver, const P1Field& u) {
  solver.update(u);
  return solver.energy();
}

Eigen::VectorXd hqc_gradient(HqcSolver& solver, const P1Field& u) {
  solver.update(u);
  return solver.gradient();
}

Eigen::SparseMatrix<double> hqc_hessian(HqcSolver& solver, const P1Field& u) {
  solver.update(u);
  return solver.hessian();
}

HqcSolution solve_hqc(std::shared_ptr<const InteractionModel> model, std::shared_ptr<const Multilattice> lattice,
                      std::shared_ptr<const MacroMesh> mesh, const LatticeField& f, HqcOptions options) {
  HqcSolver solver(std::move(model), std::move(lattice), std::move(mesh), options);
  return solver.solve(f);
}

double affine_closure_energy(std::shared_ptr<const InteractionModel> model, std::shared_ptr<const Multilattice> lattice,
                             std::shared_ptr<const MacroMesh> mesh, const P1Field& u, long sampling_cells) {
  HqcOptions opt;
  opt.relax = false;
  HqcSolver solver(std::move(model), std::move(lattice), std::move(mesh), opt, sampling_cells);
  return hqc_energy(solver, u);
}

}  // namespace hqclab
