#include <benchmark/benchmark.h>

#include "coed/commands.hpp"
#include "coed/config.hpp"
#include "coed/lowrank.hpp"
#include "coed/oed.hpp"
#include "coed/rng.hpp"
#include "coed/uq.hpp"

namespace {

using namespace coed;

// Shared problem state, built once: the benchmarks compare the OpenMP
// candidate scan and Monte Carlo loops against their serial twins on the
// reference configuration shrunk to a 15x15 mesh.
struct Fixture {
  cli::Experiment ex;
  lowrank::FrozenSVD f;
  double sigma = 0.0;
  linalg::ApplyFn goal;
  bayes::Design d{Vec(), 0.0};

  Fixture() {
    config::ExperimentConfig cfg;
    cfg.mesh_n = 15;
    cfg.k_f = 50;
    ex = cli::build_experiment(cfg);
    auto fwd = cli::forward_ops(ex);
    f = lowrank::build_frozen_svd(fwd, ex.ip.prior, cfg.k_f, cfg.p,
                                  rng::Stream::substream(cfg.seed, "sketch"));
    sigma = ex.ip.synthesize(ex.m_true, cfg.delta, rng::Stream::substream(cfg.seed, "noise"))
                .sigma;
    goal = [map = &ex.map](const Vec& v) -> Vec { return map->apply_A(v); };
    d = bayes::Design::from_indices(
        ex.ip.obs.count(), {0, 8, 16, 22, 28, 36, 40, 44, 52, 58, 64, 72, 80}, sigma);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void greedy_scan(benchmark::State& state, bool parallel) {
  auto& fx = fixture();
  oed::CriterionSpec crit = oed::coed_criterion(fx.f, fx.sigma);
  for (auto _ : state) {
    auto res = oed::greedy_select(crit, 13, fx.ex.ip.obs.count(), parallel);
    benchmark::DoNotOptimize(res.w.w.data());
  }
}

void bayes_risk(benchmark::State& state, bool parallel) {
  auto& fx = fixture();
  for (auto _ : state) {
    double risk = uq::bayes_risk_mc(fx.ex.ip, fx.goal, fx.d, 64, 42, parallel);
    benchmark::DoNotOptimize(risk);
  }
}

}  // namespace

BENCHMARK_CAPTURE(greedy_scan, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(greedy_scan, openmp, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bayes_risk, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bayes_risk, openmp, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
