#include "hqclab/atomistic.hpp"
#include "hqclab/hqc.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace hqclab;

namespace {

Vec vec1(double x) { return Vec::Constant(1, x); }

std::shared_ptr<const Multilattice> chain_lattice(long cells) {
  return build_multilattice(1, 1.0 / double(cells), {vec1(0.0), vec1(0.5)});
}

Eigen::VectorXd noise(long n, double amp) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

void BM_AtomisticGradientChain(benchmark::State& state) {
  const auto L = chain_lattice(state.range(0));
  EquilibriumProblem p(L, make_dynamics_model().model);
  const LatticeField u(L, noise(L->dof_count(), 1e-4));
  for (auto _ : state) benchmark::DoNotOptimize(energy_gradient(p, u));
  state.SetItemsProcessed(state.iterations() * L->site_count());
}
BENCHMARK(BM_AtomisticGradientChain)->RangeMultiplier(4)->Range(256, 16384);

void BM_AtomisticGradientNetwork(benchmark::State& state) {
  const auto sm = make_stochastic_model(state.range(0), 1);
  EquilibriumProblem p(sm.lattice, sm.model, sm.force);
  const LatticeField u(sm.lattice, noise(sm.lattice->dof_count(), 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(energy_gradient(p, u));
  state.SetItemsProcessed(state.iterations() * sm.lattice->site_count());
}
BENCHMARK(BM_AtomisticGradientNetwork)->RangeMultiplier(2)->Range(32, 256);

void BM_MicroSolveNetwork(benchmark::State& state) {
  const long n = 128, rep = state.range(0);
  const auto sm = make_stochastic_model(n, 1);
  const auto mesh = build_mesh(2, 4);
  const auto D = place_sampling_domains(*mesh, *sm.lattice, rep);
  MicroProblem P(sm.model, D[0]);
  Mat F(2, 2);
  F << 0.1, -0.05, 0.02, 0.08;
  const AffineMap lin{Vec::Zero(2), Vec::Zero(2), F};
  for (auto _ : state) benchmark::DoNotOptimize(micro_solve(P, lin, nullptr));
}
BENCHMARK(BM_MicroSolveNetwork)->RangeMultiplier(2)->Range(8, 32)->Unit(benchmark::kMillisecond);

void BM_HqcSolveChain(benchmark::State& state) {
  const auto L = chain_lattice(1024);
  const auto mesh = build_mesh(1, state.range(0));
  LatticeField f(L);
  for (long k = 0; k < L->site_count(); ++k) f.at(k)[0] = std::sin(6.283185307179586 * L->position(k)[0]);
  f = project_zero_mean(f);
  const auto model = make_spring_chain({1.0, 4.0});
  for (auto _ : state) benchmark::DoNotOptimize(solve_hqc(model, L, mesh, f));
}
BENCHMARK(BM_HqcSolveChain)->RangeMultiplier(4)->Range(4, 256)->Unit(benchmark::kMillisecond);

void BM_HqcSolveNetwork(benchmark::State& state) {
  const auto sm = make_stochastic_model(64, 1);
  const auto mesh = build_mesh(2, state.range(0));
  HqcOptions o;
  o.load = LoadMode::Lattice;
  for (auto _ : state) {
    HqcSolver s(sm.model, sm.lattice, mesh, o, 8);
    benchmark::DoNotOptimize(s.solve(sm.force));
  }
}
BENCHMARK(BM_HqcSolveNetwork)->RangeMultiplier(2)->Range(4, 16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
