#include "hqclab/fem.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hqclab;
using oracle::vec1;
using oracle::vec2;

namespace {

Vec smooth(const Vec& x) {
  using std::numbers::pi;
  if (x.size() == 1) return vec1(std::sin(2 * pi * x[0]) + 0.5 * std::cos(4 * pi * x[0]));
  return vec2(std::sin(2 * pi * x[0]) * std::cos(2 * pi * x[1]), std::cos(2 * pi * (x[0] + x[1])));
}

Mat smooth_gradient(const Vec& x) {
  using std::numbers::pi;
  if (x.size() == 1) return oracle::mat1(2 * pi * std::cos(2 * pi * x[0]) - 2 * pi * std::sin(4 * pi * x[0]));
  const double s = -2 * pi * std::sin(2 * pi * (x[0] + x[1]));
  return oracle::mat2(2 * pi * std::cos(2 * pi * x[0]) * std::cos(2 * pi * x[1]),
                      -2 * pi * std::sin(2 * pi * x[0]) * std::sin(2 * pi * x[1]), s, s);
}

}  // namespace

TEST_CASE("mesh bookkeeping") {
  const auto m1 = build_mesh(1, 4);
  CHECK(m1->element_count() == 4);
  CHECK(m1->node_count() == 4);
  const auto m2 = build_mesh(2, 2);
  CHECK(m2->element_count() == 8);
  for (long e = 0; e < 8; ++e) CHECK(m2->element_measure(e) == 0.125);
  for (int d : {1, 2})
    for (long n : {1L, 3L, 8L}) {
      const auto m = build_mesh(d, n);
      double total = 0.0;
      for (long e = 0; e < m->element_count(); ++e) total += m->element_measure(e);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
  CHECK_THROWS_AS(build_mesh(3, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_mesh(1, 0), std::invalid_argument);
}

TEST_CASE("mesh geometry") {
  const auto m = build_mesh(2, 4);
  for (long e = 0; e < m->element_count(); ++e) {
    CHECK(m->locate(m->barycenter(e)) == e);
    // Hat gradients of one element sum to zero and reproduce the identity.
    const auto G = m->basis_gradients(e);
    CHECK(G.colwise().sum().norm() <= 1e-12);
    Eigen::MatrixXd X(2, 3);
    for (int a = 0; a < 3; ++a) {
      const IVec v = m->vertex(e, a);
      X.col(a) << double(v[0]) / 4.0, double(v[1]) / 4.0;
    }
    CHECK((X * G - Eigen::Matrix2d::Identity()).norm() <= 1e-12);
  }
  CHECK(m->locate(vec2(1.1, -0.05)) == m->locate(vec2(0.1, 0.95)));
  for (long k = 0; k < m->node_count(); ++k) CHECK(m->node_of(m->node_coordinates(k)) == k);
}

TEST_CASE("element gradients") {
  const auto m = build_mesh(1, 2);
  CHECK(element_gradient(P1Field(m, Eigen::Vector2d(0.3, 0.3)), 0)(0, 0) == 0.0);
  const P1Field u(m, Eigen::Vector2d(0.0, 0.1));
  CHECK(element_gradient(u, 0)(0, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(element_gradient(u, 1)(0, 0) == doctest::Approx(-0.2).epsilon(1e-15));

  for (int d : {1, 2}) {
    const auto mesh = build_mesh(d, 4);
    for (long node : {0L, 5L % mesh->node_count()}) {
      P1Field hat(mesh);
      hat.at(node)[0] = 1.0;
      Mat sum = Mat::Zero(d, d);
      for (long e = 0; e < mesh->element_count(); ++e) sum += mesh->element_measure(e) * element_gradient(hat, e);
      CHECK(sum.norm() <= 1e-14);
    }
  }
}

TEST_CASE("affine extension") {
  std::mt19937_64 rng(4);
  const auto m = build_mesh(2, 3);
  P1Field u(m, oracle::random_vector(rng, m->node_count() * 2));
  for (long e = 0; e < m->element_count(); ++e) {
    const auto A = affine_extension(u, e);
    Vec mean = Vec::Zero(2);
    for (int a = 0; a < 3; ++a) {
      const IVec v = m->vertex(e, a);
      const Vec x = vec2(double(v[0]) / 3.0, double(v[1]) / 3.0);
      CHECK((A(x) - u.at(m->node(e, a))).norm() <= 1e-13);
      mean += u.at(m->node(e, a)) / 3.0;
    }
    CHECK((A(m->barycenter(e)) - mean).norm() <= 1e-13);
    CHECK((A.gradient - element_gradient(u, e)).norm() <= 1e-13);
    CHECK((u.evaluate(m->barycenter(e)) - mean).norm() <= 1e-13);
  }
}

TEST_CASE("interpolation reproduces P1 fields") {
  std::mt19937_64 rng(6);
  for (int d : {1, 2}) {
    const auto m = build_mesh(d, 5);
    P1Field u(m, oracle::random_vector(rng, m->node_count() * d));
    const auto v = interpolate(m, [&](const Vec& x) { return u.evaluate(x); });
    CHECK((u.values() - v.values()).norm() <= 1e-13);
    // Inside an element the field is affine.
    for (int k = 0; k < 20; ++k) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = oracle::uniform(rng, 0.0, 1.0);
      const long e = m->locate(x);
      const auto A = affine_extension(u, e);
      Vec y = x;
      const Vec b = m->barycenter(e);
      for (int i = 0; i < d; ++i) y[i] += std::round(b[i] - x[i]);
      CHECK((u.evaluate(x) - A(y)).norm() <= 1e-12);
    }
  }
}

TEST_CASE("gradients of interpolants converge") {
  double previous = 0.0;
  for (long n : {8L, 16L, 32L}) {
    const auto m = build_mesh(2, n);
    const auto u = interpolate(m, smooth);
    double err = 0.0;
    for (long e = 0; e < m->element_count(); ++e)
      err = std::max(err, (element_gradient(u, e) - smooth_gradient(m->barycenter(e))).norm());
    if (previous > 0.0) CHECK(previous / err >= 1.8);
    previous = err;
  }
}

TEST_CASE("integral and zero-mean projection") {
  const auto m = build_mesh(1, 4);
  P1Field u(m, Eigen::Vector4d(1.0, 2.0, 3.0, 6.0));
  CHECK(integral(u)[0] == doctest::Approx(3.0));
  const auto p = project_zero_mean(u);
  CHECK(std::abs(integral(p)[0]) <= 1e-15);
  CHECK((project_zero_mean(p).values() - p.values()).norm() <= 1e-15);
  std::mt19937_64 rng(8);
  const auto m2 = build_mesh(2, 4);
  const auto q = project_zero_mean(P1Field(m2, oracle::random_vector(rng, 32)));
  CHECK(integral(q).norm() <= 1e-14);
}

TEST_CASE("lattice sampling and errors") {
  std::mt19937_64 rng(10);
  const auto m = build_mesh(2, 4);
  auto L = build_multilattice(2, 1.0 / 16.0, {vec2(0.0, 0.0), vec2(0.5, 0.5)});
  check_alignment(*m, *L);
  const P1Field uh(m, oracle::random_vector(rng, 32));
  const auto u = sample(uh, L);
  for (long s = 0; s < L->site_count(); ++s) CHECK((u.at(s) - uh.evaluate(L->position(s))).norm() <= 1e-14);

  const auto same = lattice_error(u, u);
  CHECK(same.l2 == 0.0);
  CHECK(same.h1 == 0.0);
  const auto exact = lattice_error(u, uh);
  CHECK(exact.l2 <= 1e-12);
  CHECK(exact.h1 <= 1e-12);
  P1Field shifted = uh;
  for (long k = 0; k < m->node_count(); ++k) shifted.at(k) += vec2(0.3, -0.4);
  const auto off = lattice_error(u, shifted);
  CHECK(off.l2 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(off.h1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mesh and lattice alignment") {
  auto L = build_multilattice(1, 1.0 / 16.0, {vec1(0.0)});
  CHECK_NOTHROW(check_alignment(*build_mesh(1, 4), *L));
  CHECK_NOTHROW(check_alignment(*build_mesh(1, 16), *L));
  CHECK_THROWS_AS(check_alignment(*build_mesh(1, 3), *L), std::invalid_argument);
  CHECK_THROWS_AS(check_alignment(*build_mesh(1, 32), *L), std::invalid_argument);
  CHECK_THROWS_AS(check_alignment(*build_mesh(2, 4), *L), std::invalid_argument);
}

TEST_CASE("stiffness matrix") {
  const auto m = build_mesh(1, 6);
  const Eigen::MatrixXd K(stiffness_matrix(*m, Eigen::MatrixXd::Constant(1, 1, 0.75)));
  CHECK((K - oracle::p1_stiffness_1d(6, 0.75)).norm() <= 1e-12 * K.norm());

  // Energy identity in 2D: u^T K u / 2 = sum_T |T| C:(grad u)^2 / 2.
  std::mt19937_64 rng(12);
  const auto m2 = build_mesh(2, 3);
  Eigen::MatrixXd C = Eigen::MatrixXd::Random(4, 4);
  C = C * C.transpose();
  const Eigen::MatrixXd K2(stiffness_matrix(*m2, C));
  const P1Field u(m2, oracle::random_vector(rng, 18));
  double e = 0.0;
  for (long t = 0; t < m2->element_count(); ++t) {
    const Mat F = element_gradient(u, t);
    Eigen::Vector4d f;
    f << F(0, 0), F(1, 0), F(0, 1), F(1, 1);
    e += m2->element_measure(t) * f.dot(C * f) / 2.0;
  }
  CHECK(u.values().dot(K2 * u.values()) / 2.0 == doctest::Approx(e).epsilon(1e-12));
}
