#include <benchmark/benchmark.h>

#include "nsfp/config.hpp"
#include "nsfp/diagnostics.hpp"
#include "nsfp/harness.hpp"

namespace {

nsfp::RunConfig bench_config(int cells) {
  nsfp::RunConfig cfg = nsfp::parse_config_text(nsfp::default_config_text(), "<defaults>");
  cfg.cells = cells;
  cfg.output.directory.clear();
  return cfg;
}

void BM_EosPressure(benchmark::State& state) {
  nsfp::Eos eos(nsfp::EosParams{});
  double rho = 0.3, theta = 1.2, acc = 0.0;
  for (auto _ : state) {
    acc += eos.pressure(rho, theta);
    rho = 0.3 + 0.7 * (acc - std::floor(acc));
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_EosPressure);

void BM_EnergyInversion(benchmark::State& state) {
  nsfp::Eos eos(nsfp::EosParams{});
  const double E = eos.energy_density(0.9, 1.4);
  for (auto _ : state)
    benchmark::DoNotOptimize(eos.invert_internal_energy(0.9, E, 1.0));
}
BENCHMARK(BM_EnergyInversion);

void BM_PoissonSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  nsfp::Grid g(2, n, 2.0);
  nsfp::GravityParams gp;
  nsfp::PoissonSolver solver(g, gp);
  nsfp::ScalarField rho = g.make_scalar();
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const nsfp::Vec3 x = g.center(i, j, k);
        rho[g.idx(i, j, k)] = std::exp(-4.0 * x.dot(x));
      }
  nsfp::ScalarField psi;
  for (auto _ : state) {
    psi.assign(g.size(), 0.0); // cold start each iteration
    solver.solve(rho, psi);
  }
}
BENCHMARK(BM_PoissonSolve)->Arg(64)->Arg(128);

void BM_FullStep(benchmark::State& state) {
  nsfp::RunConfig cfg = bench_config(static_cast<int>(state.range(0)));
  nsfp::Stepper st(cfg.make_grid(), nsfp::Eos(cfg.eos), cfg.transport, cfg.penalty,
                   cfg.gravity, cfg.stepping, cfg.velocity, cfg.shape, cfg.boundary,
                   cfg.initial, cfg.volume_floor);
  for (auto _ : state) benchmark::DoNotOptimize(st.advance().dt);
}
BENCHMARK(BM_FullStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_LevelSetRebuild(benchmark::State& state) {
  nsfp::RunConfig cfg = bench_config(64);
  nsfp::Grid g = cfg.make_grid();
  nsfp::ScalarField phi0 = nsfp::initial_level_set(g, cfg.shape);
  auto sample = [&](const nsfp::Vec3& x) {
    const int i = std::clamp(int((x.x + g.half) / g.dx), 0, g.nx - 1);
    const int j = std::clamp(int((x.y + g.half) / g.dx), 0, g.ny - 1);
    return phi0[g.idx(i, j, 0)];
  };
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nsfp::rebuild_level_set(g, cfg.velocity, 0.3, sample, cfg.stepping.dt_geom));
}
BENCHMARK(BM_LevelSetRebuild)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
