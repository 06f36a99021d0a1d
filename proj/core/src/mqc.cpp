#include "hqclab/mqc.hpp"

#include "hqclab/errors.hpp"
#include "hqclab/homog.hpp"
#include "hqclab/hqc.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hqclab {

namespace {

void check_shifts(const InteractionModel& model, const Shifts& q) {
  if (static_cast<int>(q.size()) != model.species_count()) throw std::invalid_argument("one shift per species is required");
  for (const auto& v : q)
    if (v.size() != model.dim()) throw std::invalid_argument("shift has wrong dimension");
}

std::vector<double> bond_gaps(const InteractionModel& model, int b, const Mat& F, const Shifts& q) {
  const int d = model.dim();
  const auto& bonds = model.bonds(b);
  std::vector<double> g(bonds.size() * d);
  for (std::size_t k = 0; k < bonds.size(); ++k) {
    const Vec gap = F * bonds[k].r + q[bonds[k].target_species] - q[b];
    for (int i = 0; i < d; ++i) g[k * d + i] = gap[i];
  }
  return g;
}

// Gradient and Hessian with respect to all m shifts (q_0 included).
double full_derivatives(const InteractionModel& model, const Mat& F, const Shifts& q, Eigen::VectorXd* grad,
                        Eigen::MatrixXd* hess) {
  const int d = model.dim();
  const int m = model.species_count();
  double e = 0.0;
  if (grad) grad->setZero(m * d);
  if (hess) hess->setZero(m * d, m * d);
  for (int b = 0; b < m; ++b) {
    const auto& pot = model.potential(b);
    const auto& bonds = model.bonds(b);
    const auto g = bond_gaps(model, b, F, q);
    const int k = static_cast<int>(bonds.size());
    if (!grad && !hess) {
      e += pot.energy(g.data());
      continue;
    }
    std::vector<double> dv(k * d);
    e += pot.gradient(g.data(), dv.data());
    if (grad)
      for (int r = 0; r < k; ++r)
        for (int i = 0; i < d; ++i) {
          (*grad)[bonds[r].target_species * d + i] += dv[r * d + i];
          (*grad)[b * d + i] -= dv[r * d + i];
        }
    if (hess) {
      Eigen::MatrixXd H(k * d, k * d);
      pot.hessian(g.data(), H);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
          const int tr = bonds[r].target_species, tc = bonds[c].target_species;
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
              const double v = H(r * d + i, c * d + j);
              (*hess)(tr * d + i, tc * d + j) += v;
              (*hess)(b * d + i, b * d + j) += v;
              (*hess)(tr * d + i, b * d + j) -= v;
              (*hess)(b * d + i, tc * d + j) -= v;
            }
        }
    }
  }
  const double inv = 1.0 / double(m);
  if (grad) *grad *= inv;
  if (hess) *hess *= inv;
  return std::isfinite(e) ? e * inv : std::numeric_limits<double>::infinity();
}

}  // namespace

double mqc_element_energy(const InteractionModel& model, const Mat& F, const Shifts& q) {
  check_shifts(model, q);
  return full_derivatives(model, F, q, nullptr, nullptr);
}

Eigen::VectorXd mqc_shift_gradient(const InteractionModel& model, const Mat& F, const Shifts& q) {
  check_shifts(model, q);
  const int d = model.dim();
  Eigen::VectorXd g;
  full_derivatives(model, F, q, &g, nullptr);
  return g.tail(g.size() - d);
}

ShiftSolution solve_shift_vectors(const InteractionModel& model, const Mat& F, const Shifts* guess) {
  const int d = model.dim();
  const int m = model.species_count();
  ShiftSolution out;
  out.q = guess ? *guess : Shifts(m, Vec::Zero(d));
  check_shifts(model, out.q);
  out.q[0].setZero();
  if (m == 1) {
    out.report.converged = true;
    return out;
  }
  const int n = (m - 1) * d;
  const double threshold = 1e-12 * (1.0 + F.norm());
  auto unknowns = [&](const Shifts& q) {
    Eigen::VectorXd x(n);
    for (int a = 1; a < m; ++a) x.segment((a - 1) * d, d) = q[a];
    return x;
  };
  auto shifts = [&](const Eigen::VectorXd& x) {
    Shifts q(m, Vec::Zero(d));
    for (int a = 1; a < m; ++a) q[a] = x.segment((a - 1) * d, d);
    return q;
  };
  Eigen::VectorXd x = unknowns(out.q), g_full, g;
  Eigen::MatrixXd H_full;
  double e = full_derivatives(model, F, out.q, &g_full, &H_full);
  if (!std::isfinite(e)) throw SolverError("inadmissible shift guess");
  auto& rep = out.report;
  for (;;) {
    g = g_full.tail(n);
    rep.residual = std::sqrt(double(m) * g.squaredNorm());
    rep.history.push_back(rep.residual);
    if (rep.residual <= threshold) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= 50) throw SolverError("shift Newton did not converge", rep.history);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H_full.bottomRightCorner(n, n));
    if (ldlt.info() != Eigen::Success) throw SolverError("singular shift Hessian", rep.history);
    const Eigen::VectorXd step = -ldlt.solve(g);
    double alpha = 1.0, e_new = 0.0;
    Eigen::VectorXd trial;
    int halvings = 0;
    for (; halvings <= 40; ++halvings, alpha *= 0.5) {
      trial = x + alpha * step;
      e_new = full_derivatives(model, F, shifts(trial), nullptr, nullptr);
      if (std::isfinite(e_new) && e_new <= e + 1e-13 * std::max(std::abs(e), std::abs(e_new))) break;
    }
    ++rep.iterations;
    if (halvings > 40 || alpha * step.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      if (rep.residual <= 1e3 * threshold) {
        rep.converged = true;
        break;
      }
      throw SolverError("shift line search failed", rep.history);
    }
    x = trial;
    e = full_derivatives(model, F, shifts(x), &g_full, &H_full);
  }
  out.q = shifts(x);
  return out;
}

double mqc_energy(const InteractionModel& model, std::shared_ptr<const MacroMesh> mesh, const P1Field& u,
                  const ShiftState* guesses, ShiftState* state) {
  const int d = model.dim();
  const int m = model.species_count();
  if (state) {
    state->q.clear();
    for (int a = 0; a < m; ++a) state->q.emplace_back(mesh, d);
  }
  double e = 0.0;
  for (long t = 0; t < mesh->element_count(); ++t) {
    const Mat F = element_gradient(u, t);
    std::optional<Shifts> guess;
    if (guesses) {
      guess.emplace(m, Vec(d));
      for (int a = 0; a < m; ++a) (*guess)[a] = guesses->q[a].at(t);
    }
    ShiftSolution sol = solve_shift_vectors(model, F, guess ? &*guess : nullptr);
    e += mesh->element_measure(t) * mqc_element_energy(model, F, sol.q);
    if (state)
      for (int a = 0; a < m; ++a) state->q[a].at(t) = sol.q[a];
  }
  return e;
}

Shifts shifts_from_corrector(const Eigen::VectorXd& U, int dim, int species, double eps) {
  if (U.size() < species * dim) throw std::invalid_argument("corrector too short");
  Shifts q(species, Vec(dim));
  for (int a = 0; a < species; ++a) q[a] = (U.segment(a * dim, dim) - U.segment(0, dim)) / eps;
  return q;
}

Eigen::VectorXd corrector_from_shifts(const Shifts& q, double eps) {
  const int m = static_cast<int>(q.size());
  const int d = static_cast<int>(q[0].size());
  Vec mean = Vec::Zero(d);
  for (const auto& v : q) mean += v;
  mean /= double(m);
  Eigen::VectorXd U(m * d);
  for (int a = 0; a < m; ++a) U.segment(a * d, d) = eps * (q[a] - mean);
  return U;
}

EquivalenceReport equivalence_report(std::shared_ptr<const InteractionModel> model,
                                     std::shared_ptr<const Multilattice> lattice,
                                     std::shared_ptr<const MacroMesh> mesh, const P1Field& u) {
  EquivalenceReport rep;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    HqcSolver solver(model, lattice, mesh);
    rep.e_hqc = hqc_energy(solver, u);
  } catch (const SolverError& e) {
    rep.hqc_ok = false;
    rep.e_hqc = nan;
    rep.failure += std::string("hqc: ") + e.what() + "; ";
  }
  try {
    HomogenizedDensity density(model);
    rep.e_hom = homogenized_energy(density, u);
  } catch (const SolverError& e) {
    rep.hom_ok = false;
    rep.e_hom = nan;
    rep.failure += std::string("homogenized: ") + e.what() + "; ";
  }
  try {
    rep.e_mqc = mqc_energy(*model, mesh, u);
  } catch (const SolverError& e) {
    rep.mqc_ok = false;
    rep.e_mqc = nan;
    rep.failure += std::string("mqc: ") + e.what() + "; ";
  }
  rep.max_gap = std::max({std::abs(rep.e_hqc - rep.e_hom), std::abs(rep.e_hqc - rep.e_mqc),
                          std::abs(rep.e_hom - rep.e_mqc)});
  if (!(rep.hqc_ok && rep.hom_ok && rep.mqc_ok)) rep.max_gap = std::numeric_limits<double>::infinity();
  return rep;
}

}  // namespace hqclab
