#include "hqclab/lattice.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hqclab;
using oracle::vec1;
using oracle::vec2;

TEST_CASE("multilattice site layout") {
  SUBCASE("two species chain") {
    auto L = build_multilattice(1, 0.25, {vec1(0.0), vec1(0.5)});
    REQUIRE(L->site_count() == 8);
    for (long s = 0; s < 8; ++s) CHECK(L->position(s)[0] == doctest::Approx(s / 8.0).epsilon(1e-15));
  }
  SUBCASE("simple chain") {
    auto L = build_multilattice(1, 0.25, {vec1(0.0)});
    CHECK(L->site_count() == 4);
    CHECK(L->species_count() == 1);
  }
  SUBCASE("square lattice") {
    auto L = build_multilattice(2, 0.5, {vec2(0.0, 0.0)});
    REQUIRE(L->site_count() == 4);
    int seen = 0;
    for (long s = 0; s < 4; ++s) {
      const Vec x = L->position(s);
      CHECK((x[0] == 0.0 || x[0] == 0.5));
      CHECK((x[1] == 0.0 || x[1] == 0.5));
      seen |= 1 << int(2 * x[0] + 4 * x[1]);
    }
    CHECK(seen == 15);
  }
  SUBCASE("site index round trip") {
    auto L = build_multilattice(2, 0.25, {vec2(0.0, 0.0), vec2(0.5, 0.5)});
    for (long s = 0; s < L->site_count(); ++s)
      CHECK(L->site_index(L->site_cell(s), L->site_species(s)) == s);
  }
}

TEST_CASE("multilattice construction errors") {
  CHECK_THROWS_AS(build_multilattice(1, 0.3, {vec1(0.0)}), std::invalid_argument);
  CHECK_THROWS_AS(build_multilattice(1, 0.25, {vec1(0.5)}), std::invalid_argument);
  CHECK_THROWS_AS(build_multilattice(1, 0.25, {vec1(0.0), vec1(0.0)}), std::invalid_argument);
  CHECK_THROWS_AS(build_multilattice(1, 0.25, {vec1(0.0), vec1(1.0)}), std::invalid_argument);
  CHECK_THROWS_AS(build_multilattice(1, 0.25, {vec1(0.0), vec1(std::numbers::pi / 4)}), std::invalid_argument);
  CHECK_THROWS_AS(build_multilattice(3, 0.25, {}), std::invalid_argument);
}

TEST_CASE("discrete derivative") {
  SUBCASE("constant field") {
    auto L = build_multilattice(1, 0.125, {vec1(0.0), vec1(0.5)});
    LatticeField u(L, Eigen::VectorXd::Constant(L->dof_count(), 3.0));
    const auto d = discrete_derivative(u, L->unit_cell().offset(vec1(0.5)));
    CHECK(d.values().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("hand evaluation with wrap") {
    auto L = build_multilattice(1, 0.5, {vec1(0.0)});
    LatticeField u(L, Eigen::Vector2d(0.0, 0.1));
    const auto d = discrete_derivative(u, L->unit_cell().offset(vec1(1.0)));
    CHECK(d.values()[0] == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(d.values()[1] == doctest::Approx(-0.2).epsilon(1e-14));
  }
  SUBCASE("affine field away from the wrap") {
    const double eps = 1.0 / 16.0;
    auto L = build_multilattice(2, eps, {vec2(0.0, 0.0), vec2(0.5, 0.5)});
    const Mat F = oracle::mat2(0.3, -0.2, 0.7, 0.1);
    LatticeField u(L);
    for (long s = 0; s < L->site_count(); ++s) u.at(s) = F * L->position(s);
    const Vec r = vec2(0.5, 0.5);
    const auto d = discrete_derivative(u, L->unit_cell().offset(r));
    int checked = 0;
    for (long s = 0; s < L->site_count(); ++s) {
      const Vec x = L->position(s);
      if (x[0] + eps * r[0] >= 1.0 || x[1] + eps * r[1] >= 1.0) continue;
      CHECK((d.at(s) - F * r).norm() <= 1e-12);
      ++checked;
    }
    CHECK(checked > L->site_count() / 2);
  }
  SUBCASE("offsets that miss the lattice are rejected") {
    auto L = build_multilattice(1, 0.25, {vec1(0.0), vec1(0.5)});
    LatticeField u(L);
    CHECK_THROWS_AS(discrete_derivative(u, L->unit_cell().offset(vec1(0.25))), std::invalid_argument);
  }
}

TEST_CASE("average and inner product") {
  auto L = build_multilattice(1, 0.25, {vec1(0.0)});
  LatticeField c(L, Eigen::VectorXd::Constant(4, 2.5));
  CHECK(average(c)[0] == doctest::Approx(2.5));

  LatticeField z(L, Eigen::Vector4d(1.0, -2.0, 0.5, 0.5));
  CHECK(std::abs(inner_product(z, c)) <= 1e-15);

  LatticeField e(L, Eigen::Vector4d(0.0, 1.0, 0.0, 0.0));
  CHECK(inner_product(e, e) == 0.25);

  auto L2 = build_multilattice(1, 0.125, {vec1(0.0)});
  CHECK_THROWS_AS(inner_product(c, LatticeField(L2)), std::invalid_argument);
}

TEST_CASE("zero-mean projection") {
  auto L = build_multilattice(1, 0.5, {vec1(0.0)});
  CHECK(project_zero_mean(LatticeField(L, Eigen::Vector2d(4.0, 4.0))).values().cwiseAbs().maxCoeff() == 0.0);
  const auto p = project_zero_mean(LatticeField(L, Eigen::Vector2d(1.0, 3.0)));
  CHECK(p.values()[0] == -1.0);
  CHECK(p.values()[1] == 1.0);
  CHECK(project_zero_mean(p).values() == p.values());

  std::mt19937_64 rng(7);
  auto L3 = build_multilattice(2, 0.125, {vec2(0.0, 0.0), vec2(0.5, 0.0)});
  const auto u = project_zero_mean(oracle::random_field(rng, L3));
  CHECK(average(u).norm() <= 1e-14);
  CHECK((project_zero_mean(u).values() - u.values()).norm() <= 1e-14);
}

TEST_CASE("discrete norms") {
  auto L = build_multilattice(1, 0.5, {vec1(0.0)});
  const auto z = discrete_norms(LatticeField(L));
  CHECK(z.l2 == 0.0);
  CHECK(z.h1 == 0.0);
  const auto c = discrete_norms(LatticeField(L, Eigen::Vector2d(-1.5, -1.5)));
  CHECK(c.l2 == doctest::Approx(1.5));
  CHECK(c.h1 == doctest::Approx(1.5));
  const auto n = discrete_norms(LatticeField(L, Eigen::Vector2d(0.0, 1.0)));
  CHECK(n.l2 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(n.h1 == doctest::Approx(std::sqrt(4.5)).epsilon(1e-15));
}

TEST_CASE("norm offsets") {
  const auto chain = UnitCell(1, {vec1(0.0), vec1(0.25), vec1(0.75)});
  CHECK(chain.vector(chain.norm_offsets(0)[0])[0] == doctest::Approx(0.25));
  CHECK(chain.vector(chain.norm_offsets(1)[0])[0] == doctest::Approx(0.5));
  CHECK(chain.vector(chain.norm_offsets(2)[0])[0] == doctest::Approx(0.25));
  const auto square = UnitCell::simple(2);
  CHECK(square.norm_offsets(0).size() == 2);
}

TEST_CASE("summation by parts") {
  std::mt19937_64 rng(11);
  SUBCASE("chain with three species") {
    auto L = build_multilattice(1, 1.0 / 8.0, {vec1(0.0), vec1(1.0 / 3.0), vec1(2.0 / 3.0)});
    for (double r : {1.0 / 3.0, 2.0 / 3.0, 1.0, -4.0 / 3.0, 3.0}) {
      const auto u = oracle::random_field(rng, L), v = oracle::random_field(rng, L);
      const Offset o = L->unit_cell().offset(vec1(r));
      const Offset m = L->unit_cell().offset(vec1(-r));
      const double lhs = inner_product(discrete_derivative(u, o), v);
      const double rhs = inner_product(u, discrete_derivative(v, m));
      CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
    }
  }
  SUBCASE("two-dimensional multilattice") {
    auto L = build_multilattice(2, 1.0 / 8.0, {vec2(0.0, 0.0), vec2(0.5, 0.5)});
    for (const Vec& r : {vec2(1.0, 0.0), vec2(0.5, 0.5), vec2(-0.5, 0.5), vec2(2.0, -1.0)}) {
      const auto u = oracle::random_field(rng, L), v = oracle::random_field(rng, L);
      const double lhs = inner_product(discrete_derivative(u, L->unit_cell().offset(r)), v);
      const double rhs = inner_product(u, discrete_derivative(v, L->unit_cell().offset(-r)));
      CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
    }
  }
}

TEST_CASE("derivatives commute with lattice translations") {
  std::mt19937_64 rng(3);
  auto L = build_multilattice(2, 1.0 / 4.0, {vec2(0.0, 0.0), vec2(0.5, 0.0)});
  const auto u = oracle::random_field(rng, L);
  const IVec shift{1, 3};
  auto translate = [&](const LatticeField& f) {
    LatticeField out(L);
    for (long s = 0; s < L->site_count(); ++s) {
      const IVec c = L->site_cell(s);
      const long t = L->site_index(L->wrap({c[0] + shift[0], c[1] + shift[1]}), L->site_species(s));
      out.at(s) = f.at(t);
    }
    return out;
  };
  for (const Vec& r : {vec2(0.5, 0.0), vec2(-0.5, 1.0), vec2(0.0, 2.0)}) {
    const Offset o = L->unit_cell().offset(r);
    CHECK(discrete_derivative(translate(u), o).values() == translate(discrete_derivative(u, o)).values());
  }
}

TEST_CASE("two-scale splitting of the difference quotient") {
  // u(x) = a(x) b(species(x)) seen as g(x, y) with g P-periodic in y.
  const double eps = 1.0 / 16.0;
  auto L = build_multilattice(1, eps, {vec1(0.0), vec1(0.25), vec1(0.5), vec1(0.75)});
  const double b[4] = {1.0, -0.5, 2.0, 0.25};
  auto a = [](double x) { return std::sin(2.0 * std::numbers::pi * x) + 0.3 * std::cos(6.0 * std::numbers::pi * x); };
  LatticeField u(L);
  for (long s = 0; s < L->site_count(); ++s) u.at(s)[0] = a(L->position(s)[0]) * b[L->site_species(s)];
  for (double r : {0.25, 0.5, 1.25}) {
    const auto d = discrete_derivative(u, L->unit_cell().offset(vec1(r)));
    for (long s = 0; s < L->site_count(); ++s) {
      const double x = L->position(s)[0];
      const int sp = L->site_species(s);
      const int tp = int(std::lround(4.0 * (0.25 * sp + r))) % 4;
      const double dx = (a(x + eps * r) - a(x)) / eps * b[tp];
      const double dy = a(x) * (b[tp] - b[sp]) / eps;
      CHECK(std::abs(d.at(s)[0] - (dx + dy)) <= 1e-11);
    }
  }
}
