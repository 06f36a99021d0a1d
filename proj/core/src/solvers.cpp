#include "hqclab/solvers.hpp"

#include "hqclab/errors.hpp"
#include "hqclab/lattice.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace hqclab {

struct PinnedSolver::Impl {
  int dim = 1;
  long n = 0;
  enum class Kind { None, Dense, Sparse, Iterative } kind = Kind::None;
  Eigen::LDLT<Eigen::MatrixXd> dense;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> sparse;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  Eigen::SparseMatrix<double> reduced;
  double min_pivot = 0.0;
  bool positive = false;

  void check_pivots(const Eigen::VectorXd& D) {
    if (D.size() == 0) {
      min_pivot = 0.0;
      positive = true;
      return;
    }
    const double big = D.cwiseAbs().maxCoeff();
    const double small = D.cwiseAbs().minCoeff();
    min_pivot = D.minCoeff();
    positive = min_pivot > 0.0;
    if (!(big > 0.0) || !(small > 1e-13 * big) || !std::isfinite(big))
      throw SolverError("singular system beyond the translation kernel");
  }
};

PinnedSolver::PinnedSolver() : impl_(std::make_unique<Impl>()) {}
PinnedSolver::~PinnedSolver() = default;
PinnedSolver::PinnedSolver(PinnedSolver&&) noexcept = default;
PinnedSolver& PinnedSolver::operator=(PinnedSolver&&) noexcept = default;

void PinnedSolver::factorize(const Eigen::MatrixXd& matrix, int dim) {
  auto& s = *impl_;
  s.dim = dim;
  s.n = matrix.rows();
  const long r = s.n - dim;
  s.kind = Impl::Kind::Dense;
  s.dense.compute(matrix.bottomRightCorner(r, r));
  if (s.dense.info() != Eigen::Success) throw SolverError("dense factorization failed");
  s.check_pivots(s.dense.vectorD());
}

void PinnedSolver::factorize(const Eigen::SparseMatrix<double>& matrix, int dim) {
  auto& s = *impl_;
  const long n = matrix.rows();
  const long r = n - dim;
  if (r <= kDenseLimit) {
    factorize(Eigen::MatrixXd(matrix), dim);
    return;
  }
  s.dim = dim;
  s.n = n;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(matrix.nonZeros());
  for (int k = 0; k < matrix.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, k); it; ++it)
      if (it.row() >= dim && it.col() >= dim) trip.emplace_back(it.row() - dim, it.col() - dim, it.value());
  s.reduced.resize(r, r);
  s.reduced.setFromTriplets(trip.begin(), trip.end());
  if (r <= kIterativeLimit) {
    s.kind = Impl::Kind::Sparse;
    s.sparse.compute(s.reduced);
    if (s.sparse.info() != Eigen::Success) throw SolverError("sparse factorization failed");
    s.check_pivots(s.sparse.vectorD());
  } else {
    s.kind = Impl::Kind::Iterative;
    s.cg.setTolerance(1e-14);
    s.cg.setMaxIterations(20 * r);
    s.cg.compute(s.reduced);
    if (s.cg.info() != Eigen::Success) throw SolverError("preconditioner setup failed");
    s.min_pivot = std::numeric_limits<double>::quiet_NaN();
    s.positive = true;
  }
}

Eigen::VectorXd PinnedSolver::solve(const Eigen::VectorXd& rhs) const {
  const auto& s = *impl_;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.n);
  const long r = s.n - s.dim;
  Eigen::VectorXd b = rhs.tail(r);
  switch (s.kind) {
    case Impl::Kind::Dense: x.tail(r) = s.dense.solve(b); break;
    case Impl::Kind::Sparse: x.tail(r) = s.sparse.solve(b); break;
    case Impl::Kind::Iterative: {
      x.tail(r) = s.cg.solve(b);
      if (s.cg.info() != Eigen::Success) throw SolverError("conjugate gradient did not converge");
      break;
    }
    case Impl::Kind::None: throw std::logic_error("solve before factorize");
  }
  return x;
}

bool PinnedSolver::ready() const { return impl_->kind != Impl::Kind::None; }
double PinnedSolver::min_pivot() const { return impl_->min_pivot; }
bool PinnedSolver::positive_definite() const { return impl_->positive; }

NewtonReport newton_minimize(const NewtonProblem& p, Eigen::VectorXd& w, const NewtonOptions& opt) {
  NewtonReport rep;
  Eigen::VectorXd g(w.size()), trial(w.size());
  PinnedSolver solver;
  subtract_mean(w, p.dim);
  double e = p.gradient(w, g);
  if (!std::isfinite(e)) throw SolverError("initial guess is inadmissible");
  for (;;) {
    rep.residual = p.residual_norm(g);
    rep.history.push_back(rep.residual);
    if (rep.residual <= p.threshold) {
      rep.converged = true;
      return rep;
    }
    if (rep.iterations >= opt.max_iterations) break;
    p.factorize(w, solver);
    Eigen::VectorXd step = -solver.solve(g);
    subtract_mean(step, p.dim);
    double alpha = 1.0;
    double e_new = 0.0;
    int halvings = 0;
    for (;; ++halvings) {
      trial = w + alpha * step;
      e_new = p.energy(trial);
      const double slack = 1e-13 * std::max(std::abs(e), std::abs(e_new));
      if (std::isfinite(e_new) && e_new <= e + slack) break;
      if (halvings >= opt.max_halvings) break;
      alpha *= 0.5;
    }
    ++rep.iterations;
    const double change = alpha * step.lpNorm<Eigen::Infinity>();
    const bool accepted = std::isfinite(e_new) && halvings < opt.max_halvings;
    if (!accepted || change <= 1e-15 * (1.0 + w.lpNorm<Eigen::Infinity>())) {
      // No further progress possible in floating point.
      rep.converged = rep.residual <= 1e3 * p.threshold;
      if (rep.converged) return rep;
      break;
    }
    w = trial;
    e = p.gradient(w, g);
  }
  std::ostringstream msg;
  msg << "Newton did not converge after " << rep.iterations << " iterations (residual " << rep.residual
      << ", threshold " << p.threshold << ")";
  throw SolverError(msg.str(), rep.history);
}

void parallel_for(long count, int threads, const std::function<void(long)>& body) {
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  const long workers = std::min<long>(threads, count);
  std::vector<std::thread> pool;
  std::exception_ptr error;
  long first_failed = count;
  std::mutex mu;
  for (long t = 0; t < workers; ++t) {
    const long begin = count * t / workers, end = count * (t + 1) / workers;
    pool.emplace_back([&, begin, end] {
      for (long i = begin; i < end; ++i) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          // Keep the failure of the lowest index so errors are schedule independent.
          if (i < first_failed) {
            first_failed = i;
            error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace hqclab
