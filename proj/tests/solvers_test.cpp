#include "hqclab/errors.hpp"
#include "hqclab/lattice.hpp"
#include "hqclab/solvers.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>

using namespace hqclab;

namespace {

// Periodic graph Laplacian of a ring (d = 1) or torus (d = 2) with random
// positive weights.
Eigen::SparseMatrix<double> laplacian(long n, int d, std::mt19937_64& rng) {
  const long N = d == 1 ? n : n * n;
  std::vector<Eigen::Triplet<double>> t;
  auto edge = [&](long a, long b) {
    const double w = oracle::uniform(rng, 0.5, 2.0);
    t.emplace_back(a, a, w);
    t.emplace_back(b, b, w);
    t.emplace_back(a, b, -w);
    t.emplace_back(b, a, -w);
  };
  for (long i = 0; i < n; ++i) {
    if (d == 1) {
      edge(i, (i + 1) % n);
      continue;
    }
    for (long j = 0; j < n; ++j) {
      edge(i + n * j, (i + 1) % n + n * j);
      edge(i + n * j, i + n * ((j + 1) % n));
    }
  }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

void check_solve(const Eigen::SparseMatrix<double>& A, std::mt19937_64& rng, double tol) {
  Eigen::VectorXd b = oracle::random_vector(rng, A.rows());
  b.array() -= b.mean();
  PinnedSolver s;
  s.factorize(A, 1);
  CHECK(s.ready());
  Eigen::VectorXd x = s.solve(b);
  x.array() -= x.mean();
  CHECK((A * x - b).norm() <= tol * b.norm());
}

}  // namespace

TEST_CASE("pinned solver paths") {
  std::mt19937_64 rng(1);
  SUBCASE("dense") {
    const auto A = laplacian(50, 1, rng);
    check_solve(A, rng, 1e-12);
    PinnedSolver s;
    s.factorize(Eigen::MatrixXd(A), 1);
    CHECK(s.positive_definite());
    CHECK(s.min_pivot() > 0.0);
  }
  SUBCASE("sparse direct") { check_solve(laplacian(40, 2, rng), rng, 1e-12); }
  SUBCASE("conjugate gradient above the direct limit") {
    const long n = 320;
    REQUIRE(n * n - 1 > PinnedSolver::kIterativeLimit);
    check_solve(laplacian(n, 2, rng), rng, 1e-10);
  }
  SUBCASE("indefinite matrices are reported") {
    Eigen::MatrixXd A = Eigen::MatrixXd(laplacian(10, 1, rng));
    A(5, 5) -= 10.0;
    PinnedSolver s;
    s.factorize(A, 1);
    CHECK_FALSE(s.positive_definite());
  }
  SUBCASE("a second kernel vector is singular") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(6, 6);
    A.topLeftCorner(3, 3) = Eigen::MatrixXd(laplacian(3, 1, rng));
    A.bottomRightCorner(3, 3) = Eigen::MatrixXd(laplacian(3, 1, rng));
    PinnedSolver s;
    CHECK_THROWS_AS(s.factorize(A, 1), SolverError);
  }
  SUBCASE("solve before factorize") {
    PinnedSolver s;
    CHECK_FALSE(s.ready());
    CHECK_THROWS(s.solve(Eigen::VectorXd::Zero(3)));
  }
}

TEST_CASE("damped Newton") {
  // E(w) = sum_i cosh(w_{i+1} - w_i) - b . w on a ring, zero-mean unknowns.
  const long n = 24;
  std::mt19937_64 rng(2);
  Eigen::VectorXd b = oracle::random_vector(rng, n, 2.0);
  b.array() -= b.mean();
  NewtonProblem p;
  p.energy = [&](const Eigen::VectorXd& w) {
    double e = -b.dot(w);
    for (long i = 0; i < n; ++i) e += std::cosh(w[(i + 1) % n] - w[i]);
    return e;
  };
  p.gradient = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    g = -b;
    for (long i = 0; i < n; ++i) {
      const double s = std::sinh(w[(i + 1) % n] - w[i]);
      g[(i + 1) % n] += s;
      g[i] -= s;
    }
    return p.energy(w);
  };
  p.factorize = [&](const Eigen::VectorXd& w, PinnedSolver& s) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (long i = 0; i < n; ++i) {
      const long j = (i + 1) % n;
      const double c = std::cosh(w[j] - w[i]);
      H(i, i) += c;
      H(j, j) += c;
      H(i, j) -= c;
      H(j, i) -= c;
    }
    s.factorize(H, 1);
  };
  p.residual_norm = [](const Eigen::VectorXd& g) { return g.norm(); };
  p.threshold = 1e-12;

  SUBCASE("converges quadratically from far away") {
    Eigen::VectorXd w = oracle::random_vector(rng, n, 3.0);
    const auto rep = newton_minimize(p, w, {});
    CHECK(rep.converged);
    CHECK(std::abs(w.mean()) <= 1e-13);
    Eigen::VectorXd g;
    p.gradient(w, g);
    CHECK(g.norm() <= 1e-9);
    REQUIRE(rep.history.size() >= 3);
    CHECK(rep.history.back() <= rep.history.front());
  }
  SUBCASE("reports the residual history when it runs out of iterations") {
    Eigen::VectorXd w = oracle::random_vector(rng, n, 3.0);
    NewtonOptions o;
    o.max_iterations = 1;
    try {
      newton_minimize(p, w, o);
      FAIL("expected a solver error");
    } catch (const SolverError& e) {
      CHECK(e.residual_history().size() == 2);
      CHECK(e.element() == -1);
    }
  }
  SUBCASE("inadmissible start") {
    NewtonProblem q = p;
    q.gradient = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
      g.setZero();
      return std::numeric_limits<double>::infinity();
    };
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    CHECK_THROWS_AS(newton_minimize(q, w, {}), SolverError);
  }
}

TEST_CASE("parallel_for") {
  for (int threads : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(101, threads, [&](long i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  SUBCASE("the failure of the lowest index wins") {
    for (int threads : {1, 4}) {
      try {
        parallel_for(40, threads, [](long i) {
          if (i % 7 == 3) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected an exception");
      } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "3");
      }
    }
  }
}
