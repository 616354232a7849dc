#include <benchmark/benchmark.h>

#include "jointpiv/energy.hpp"
#include "jointpiv/motion_grid.hpp"
#include "jointpiv/prox.hpp"
#include "jointpiv/synth.hpp"
#include "jointpiv/triangulate.hpp"

namespace {

using namespace jointpiv;

const SyntheticScene& scene() {
  static const SyntheticScene s = [] {
    SceneOptions opt;
    opt.ppp = 0.05;
    return generate(parse_flow("taylor_green:3", opt.volume), opt);
  }();
  return s;
}

void BM_SmoothEnergy(benchmark::State& state) {
  const SyntheticScene& s = scene();
  EnergyParams params;
  params.lambda = 0.04;
  SmoothEnergy energy(s.cameras, s.images, s.truth_flow.dims(), s.truth_flow.spacing(), params);
  std::vector<double> p, c;
  stack_particles(s.particles_t0, p, c);
  const std::vector<double> u = s.truth_flow.values();
  SmoothEnergy::Result result;
  for (auto _ : state) {
    energy.evaluate(p, c, u, result);
    benchmark::DoNotOptimize(result.value);
  }
  state.counters["particles"] = static_cast<double>(s.particles_t0.size());
}
BENCHMARK(BM_SmoothEnergy)->Unit(benchmark::kMillisecond);

void BM_Projection(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GridDims dims{n, n, n};
  MotionGrid u(dims, 1.0);
  for (std::size_t i = 0; i < u.values().size(); ++i) u.values()[i] = std::sin(0.37 * static_cast<double>(i));
  const double tol = state.range(1) == 0 ? 1e-3 : 1e-12;
  const int iters = state.range(1) == 0 ? 20 : 100000;
  for (auto _ : state) {
    PoissonSolver solver(dims, tol, iters);
    benchmark::DoNotOptimize(project_divfree(u, solver).values().data());
  }
}
BENCHMARK(BM_Projection)->Args({16, 0})->Args({32, 0})->Args({16, 1})->Unit(benchmark::kMillisecond);

void BM_Propose(benchmark::State& state) {
  const SyntheticScene& s = scene();
  ProposalOptions opt;
  opt.epsilon = 0.8;
  std::size_t count = 0;
  for (auto _ : state) count = propose(s.images.t0, s.cameras, s.volume, opt).size();
  state.counters["candidates"] = static_cast<double>(count);
}
BENCHMARK(BM_Propose)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
