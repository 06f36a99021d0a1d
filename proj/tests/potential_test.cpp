#include "hqclab/potential.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hqclab;
using oracle::vec1;
using oracle::vec2;

namespace {

// Central-difference checks of site gradient and Hessian on one gap tuple.
void check_site_derivatives(const InteractionModel& model, int species, const std::vector<Vec>& gaps, long cell = 0) {
  const int d = model.dim();
  const long k = long(gaps.size());
  auto pack = [&](const std::vector<Vec>& g) {
    Eigen::VectorXd x(k * d);
    for (long b = 0; b < k; ++b) x.segment(b * d, d) = g[b];
    return x;
  };
  auto unpack = [&](const Eigen::VectorXd& x) {
    std::vector<Vec> g(k, Vec(d));
    for (long b = 0; b < k; ++b) g[b] = x.segment(b * d, d);
    return g;
  };
  const Eigen::VectorXd x0 = pack(gaps);
  const Eigen::VectorXd grad = pack(site_gradient(model, species, gaps, cell));
  const Eigen::MatrixXd hess = site_hessian(model, species, gaps, cell);
  const double t = 1e-6;
  Eigen::VectorXd fd_grad(k * d);
  Eigen::MatrixXd fd_hess(k * d, k * d);
  for (long i = 0; i < k * d; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(k * d);
    e[i] = 1.0;
    fd_grad[i] = oracle::directional_fd([&](const Eigen::VectorXd& x) { return site_energy(model, species, unpack(x), cell); },
                                        x0, e, t);
    const Eigen::VectorXd gp = pack(site_gradient(model, species, unpack(x0 + t * e), cell));
    const Eigen::VectorXd gm = pack(site_gradient(model, species, unpack(x0 - t * e), cell));
    fd_hess.col(i) = (gp - gm) / (2.0 * t);
  }
  CHECK(oracle::rel_diff(grad, fd_grad) <= 1e-6);
  CHECK(oracle::rel_diff(hess, fd_hess) <= 1e-5);
  CHECK((hess - hess.transpose()).norm() <= 1e-12 * hess.norm());
}

}  // namespace

TEST_CASE("spring site energy") {
  auto model = make_spring_chain({2.0});
  CHECK(site_energy(*model, 0, {vec1(0.3)}) == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(site_gradient(*model, 0, {vec1(0.3)})[0][0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(site_hessian(*model, 0, {vec1(0.3)})(0, 0) == 2.0);
  CHECK(site_energy(*model, 0, {vec1(0.0)}) == 0.0);
}

TEST_CASE("Lennard-Jones pair law") {
  const LennardJonesLaw lj{1.0, 1.0, 1.0};
  CHECK(pair_energy(lj, vec1(1.0), vec1(0.0)) == doctest::Approx(-1.0).epsilon(1e-15));
  Vec g;
  Mat h;
  pair_derivatives(lj, vec1(1.0), vec1(0.0), &g, &h);
  CHECK(std::abs(g[0]) <= 1e-13);
  CHECK(h(0, 0) > 0.0);
  // Minimum sits at bond length ell * length_unit.
  const LennardJonesLaw scaled{2.0, 1.1, 0.5};
  pair_derivatives(scaled, vec2(0.3, 0.4), vec2(0.55 * 0.3 / 0.5 - 0.3, 0.55 * 0.4 / 0.5 - 0.4), &g, &h);
  CHECK(g.norm() <= 1e-12);
  CHECK(pair_energy(scaled, vec2(0.3, 0.4), vec2(0.55 * 0.6 - 0.3, 0.55 * 0.8 - 0.4)) ==
        doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(std::isinf(pair_energy(lj, vec1(1.0), vec1(-1.0))));
  CHECK(pair_energy(lj, vec1(1.0), vec1(-1.5)) > 0.0);
}

TEST_CASE("collapsed bonds are inadmissible") {
  auto model = make_lennard_jones_model(UnitCell::uniform_chain(1), 1.0, {LennardJonesLaw{1.0, 1.0, 1.0}});
  REQUIRE(model->bonds(0).size() == 2);
  std::vector<Vec> gaps;
  for (const auto& b : model->bonds(0)) gaps.push_back(-b.r);
  CHECK_THROWS_AS(site_energy(*model, 0, gaps), std::domain_error);
}

TEST_CASE("quadratic models") {
  auto model = make_spring_chain({1.0, 3.0, 0.5});
  std::mt19937_64 rng(5);
  for (int species = 0; species < 3; ++species) {
    const Vec g = vec1(oracle::uniform(rng, -1, 1));
    const Eigen::MatrixXd h0 = site_hessian(*model, species, {vec1(0.0)});
    CHECK(site_hessian(*model, species, {g}) == h0);
    CHECK(site_energy(*model, species, {2.5 * g}) == doctest::Approx(6.25 * site_energy(*model, species, {g})));
  }
  CHECK(model->quadratic());
  CHECK_FALSE(make_dynamics_model().model->quadratic());
}

TEST_CASE("dynamics model parameters") {
  const auto dm = make_dynamics_model();
  REQUIRE(dm.model->species_count() == 2);
  CHECK(dm.species_masses == std::vector<double>{2.0, 1.0});
  const double expected[2][2] = {{1.6, 0.99}, {0.4, 1.01}};
  for (int a = 0; a < 2; ++a) {
    const auto& pot = dynamic_cast<const PairPotential&>(dm.model->potential(a));
    CHECK(dm.model->bonds(a).size() == 12);
    for (const auto& law : pot.laws()) {
      const auto& lj = std::get<LennardJonesLaw>(law);
      CHECK(lj.s == expected[a][0]);
      CHECK(lj.ell == expected[a][1]);
    }
    for (const auto& b : dm.model->bonds(a)) {
      CHECK(std::abs(b.r[0]) <= 3.0 + 1e-12);
      CHECK(b.r[0] != 0.0);
    }
  }
}

TEST_CASE("stochastic model") {
  const Vec f = stochastic_force(vec2(0.25, 0.25));
  CHECK(f[0] == doctest::Approx(10.0 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(10.0 * std::exp(-1.0)).epsilon(1e-14));

  const auto a = make_stochastic_model(16, 42);
  CHECK(average(a.force).norm() <= 1e-12);
  const auto b = make_stochastic_model(16, 42);
  const auto c = make_stochastic_model(16, 43);
  bool same = true, differ = false;
  for (long cell = 0; cell < 256; ++cell)
    for (int k = 0; k < RandomBondModel::kBonds; ++k) {
      same = same && a.model->strength(cell, k) == b.model->strength(cell, k);
      differ = differ || a.model->strength(cell, k) != c.model->strength(cell, k);
    }
  CHECK(same);
  CHECK(differ);
  CHECK(a.force.values() == b.force.values());

  // Stream order: cell-major, bonds (1,0), (0,1), (1,1), (-1,1); axis bonds in
  // [0.5, 10], diagonals in [0.1, 5].
  std::mt19937_64 rng(42);
  for (long cell = 0; cell < 256; ++cell)
    for (int k = 0; k < RandomBondModel::kBonds; ++k) {
      const double u = double(rng() >> 11) / 9007199254740992.0;
      const double expected = k < 2 ? 0.5 + 9.5 * u : 0.1 + 4.9 * u;
      CHECK(a.model->strength(cell, k) == expected);
    }
  const auto& bonds = a.model->bonds(0);
  REQUIRE(bonds.size() == 4);
  CHECK(bonds[0].r == vec2(1, 0));
  CHECK(bonds[1].r == vec2(0, 1));
  CHECK(bonds[2].r == vec2(1, 1));
  CHECK(bonds[3].r == vec2(-1, 1));
}

TEST_CASE("site derivatives against finite differences") {
  std::mt19937_64 rng(9);
  SUBCASE("spring chain") {
    auto model = make_spring_chain({1.0, 3.0});
    for (int s = 0; s < 2; ++s) check_site_derivatives(*model, s, {vec1(oracle::uniform(rng, -1, 1))});
  }
  SUBCASE("Lennard-Jones dynamics model") {
    const auto dm = make_dynamics_model();
    for (int s = 0; s < 2; ++s) {
      std::vector<Vec> gaps;
      for (std::size_t b = 0; b < dm.model->bonds(s).size(); ++b) gaps.push_back(vec1(oracle::uniform(rng, -0.05, 0.05)));
      check_site_derivatives(*dm.model, s, gaps);
    }
  }
  SUBCASE("two-dimensional Lennard-Jones") {
    UnitCell cell(2, {vec2(0.0, 0.0), vec2(0.5, 0.5)});
    auto model = make_lennard_jones_model(cell, 1.5, {LennardJonesLaw{1.0, 1.0, 0.7071067811865476},
                                                      LennardJonesLaw{0.5, 1.02, 0.7071067811865476}});
    for (int s = 0; s < 2; ++s) {
      std::vector<Vec> gaps;
      for (std::size_t b = 0; b < model->bonds(s).size(); ++b)
        gaps.push_back(vec2(oracle::uniform(rng, -0.05, 0.05), oracle::uniform(rng, -0.05, 0.05)));
      check_site_derivatives(*model, s, gaps);
    }
  }
  SUBCASE("random bond network") {
    const auto sm = make_stochastic_model(4, 1);
    for (long cell : {0L, 5L, 15L}) {
      std::vector<Vec> gaps;
      for (int b = 0; b < 4; ++b) gaps.push_back(vec2(oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)));
      check_site_derivatives(*sm.model, 0, gaps, cell);
    }
  }
}
