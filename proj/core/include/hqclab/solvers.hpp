#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <vector>

namespace hqclab {

/// Solver for symmetric systems whose kernel is the constant fields. The first
/// site's `dim` unknowns are pinned to zero; callers remove the mean afterwards.
class PinnedSolver {
 public:
  PinnedSolver();
  ~PinnedSolver();
  PinnedSolver(PinnedSolver&&) noexcept;
  PinnedSolver& operator=(PinnedSolver&&) noexcept;

  /// Throws SolverError if the reduced matrix is numerically singular.
  void factorize(const Eigen::SparseMatrix<double>& matrix, int dim);
  void factorize(const Eigen::MatrixXd& matrix, int dim);
  /// The right-hand side must be orthogonal to the constants.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  bool ready() const;
  /// Smallest and largest pivot magnitudes of the last factorization (direct
  /// paths only); their signs reveal indefiniteness.
  double min_pivot() const;
  bool positive_definite() const;

  static constexpr long kDenseLimit = 400;
  static constexpr long kIterativeLimit = 100000;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct NewtonOptions {
  double tol = 1e-10;
  int max_iterations = 50;
  int max_halvings = 40;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;
};

/// Callbacks describing a smooth minimization problem in zero-mean unknowns.
struct NewtonProblem {
  /// Objective; +inf marks an inadmissible state.
  std::function<double(const Eigen::VectorXd&)> energy;
  /// Writes the gradient and returns the objective.
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> gradient;
  /// Assembles and factorizes the Hessian at the given state.
  std::function<void(const Eigen::VectorXd&, PinnedSolver&)> factorize;
  /// Norm used for the convergence test.
  std::function<double(const Eigen::VectorXd&)> residual_norm;
  int dim = 1;
  /// Absolute threshold for residual_norm.
  double threshold = 0.0;
};

/// Damped Newton with halving line search. Each step is projected to zero
/// mean. Stagnation at round-off is accepted when the residual is within
/// 1e3 of the threshold and the step no longer changes the iterate.
NewtonReport newton_minimize(const NewtonProblem& problem, Eigen::VectorXd& w, const NewtonOptions& options);

/// Runs body(i) for i in [0, count) on up to `threads` workers with static
/// contiguous blocks, so results written per index are schedule independent.
void parallel_for(long count, int threads, const std::function<void(long)>& body);

}  // namespace hqclab
