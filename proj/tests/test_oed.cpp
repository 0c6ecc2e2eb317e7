#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "coed/heat.hpp"
#include "coed/oed.hpp"
#include "oracles.hpp"

using namespace coed;
using namespace coed::oed;

namespace {

Eigen::Vector2d rotation(double x, double y) { return {0.5 - y, x - 0.5}; }

struct Setup {
  fem::Mesh mesh;
  fem::FEOperators ops;
  model::TerminalMap map;
  bayes::InverseProblem ip;
  lowrank::ForwardOps fwd;
  lowrank::FrozenSVD f;
};

Setup make_setup(int n, int k_f, int p) {
  Setup s;
  s.mesh = fem::build_mesh(n);
  s.ops = fem::assemble_operators(s.mesh, 0.05, rotation, -1.0, 0.0);
  auto steady = model::build_steady(s.ops);
  auto grid = fem::assemble_temporal(1.0, 20);
  Vec chi = fem::box_indicator(s.mesh, 0.25, 0.25, 0.45, 0.45);
  auto transient = model::build_transient(s.ops, grid, chi);
  s.map = model::build_terminal_map(steady, transient);
  s.ip.prior = bayes::build_prior(s.ops, 0.1, 1.0, Vec());
  s.ip.obs = bayes::build_observations(s.mesh, steady, 9, 9);
  s.ip.steady = steady;
  s.fwd.F = [ip = &s.ip](const Vec& v) { return ip->apply_F(v); };
  s.fwd.Ft = [ip = &s.ip](const Vec& v) { return ip->apply_Ft(v); };
  s.fwd.A = [map = &s.map](const Vec& v) { return map->apply_A(v); };
  s.fwd.n_y = s.ip.obs.count();
  s.f = lowrank::build_frozen_svd(s.fwd, s.ip.prior, k_f, p, rng::Stream::substream(42, "sketch"));
  return s;
}

// Restrict a criterion to the first `take` sensors, for small brute-force
// comparisons.
CriterionSpec restrict_criterion(const CriterionSpec& base, int n_full, int take) {
  CriterionSpec c = base;
  c.evaluator = [base, n_full, take](const bayes::Design& d) {
    bayes::Design wide{Vec::Zero(n_full), d.sigma};
    wide.w.head(take) = d.w;
    return base.evaluator(wide);
  };
  return c;
}

}  // namespace

TEST_CASE("selecting the whole budget returns every candidate") {
  Setup s = make_setup(8, 40, 5);
  auto crit = restrict_criterion(coed_criterion(s.f, 0.02), 81, 12);
  auto res = greedy_select(crit, 12, 12);
  CHECK(res.selected.size() == 12);
  CHECK(res.w.w.sum() == doctest::Approx(12.0));
  std::set<int> uniq(res.selected.begin(), res.selected.end());
  CHECK(uniq.size() == 12);
}

TEST_CASE("a budget of one is the exhaustive singleton minimizer") {
  Setup s = make_setup(8, 40, 5);
  auto crit = coed_criterion(s.f, 0.02);
  auto res = greedy_select(crit, 1, 81);
  double best = std::numeric_limits<double>::infinity();
  int arg = -1;
  for (int j = 0; j < 81; ++j) {
    bayes::Design d = bayes::Design::from_indices(81, {j}, 0.02);
    double v = crit.evaluator(d);
    if (v < best) {
      best = v;
      arg = j;
    }
  }
  CHECK(res.selected[0] == arg);
  CHECK(res.criterion_trace[0] == best);
  CHECK(res.evaluations == 81);
}

TEST_CASE("two picks match brute force over pairs containing the first pick") {
  Setup s = make_setup(8, 40, 5);
  auto crit = restrict_criterion(coed_criterion(s.f, 0.02), 81, 10);
  auto res = greedy_select(crit, 2, 10);
  int first = res.selected[0];
  double best_pair = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 10; ++j) {
    if (j == first) continue;
    bayes::Design d = bayes::Design::from_indices(10, {first, j}, 0.02);
    best_pair = std::min(best_pair, crit.evaluator(d));
  }
  CHECK(res.criterion_trace[1] == best_pair);
}

TEST_CASE("ties break to the lowest index") {
  CriterionSpec flat;
  flat.name = "flat";
  flat.sigma = 0.1;
  flat.evaluator = [](const bayes::Design&) { return 0.0; };
  auto res = greedy_select(flat, 3, 7);
  CHECK(res.selected == std::vector<int>{0, 1, 2});
}

TEST_CASE("parallel and serial scans select identically") {
  Setup s = make_setup(8, 40, 5);
  auto crit = coed_criterion(s.f, 0.02);
  auto par = greedy_select(crit, 6, 81, true);
  auto ser = greedy_select(crit, 6, 81, false);
  CHECK(par.selected == ser.selected);
  REQUIRE(par.criterion_trace.size() == ser.criterion_trace.size());
  for (size_t i = 0; i < par.criterion_trace.size(); ++i) {
    CHECK(par.criterion_trace[i] == ser.criterion_trace[i]);
  }
  CHECK(par.evaluations == ser.evaluations);
}

TEST_CASE("stagewise values improve monotonically and come from real stages") {
  Setup s = make_setup(8, 40, 5);
  auto crit = coed_criterion(s.f, 0.02);
  auto res = greedy_select(crit, 8, 81);
  CHECK(res.selected.size() == 8);
  for (size_t i = 1; i < res.criterion_trace.size(); ++i) {
    CHECK(res.criterion_trace[i] <= res.criterion_trace[i - 1]);
  }
  long expect = 0;
  for (int i = 0; i < 8; ++i) expect += 81 - i;
  CHECK(res.evaluations == expect);

  CHECK_THROWS_AS(greedy_select(crit, 82, 81), std::invalid_argument);
  CHECK_THROWS_AS(greedy_select(crit, 0, 81), std::invalid_argument);
}

TEST_CASE("selection runs entirely on the precomputed factorization") {
  Setup s = make_setup(8, 40, 5);
  auto crit = coed_criterion(s.f, 0.02);
  uint64_t before = linalg::solve_count();
  greedy_select(crit, 13, 81);
  CHECK(linalg::solve_count() == before);
}

TEST_CASE("random designs are reproducible, distinct, and sized to the budget") {
  auto batch = random_designs(100, 13, 81, 0.02, 99);
  CHECK(batch.size() == 100);
  std::set<std::vector<double>> seen;
  for (const auto& d : batch) {
    CHECK(d.w.sum() == doctest::Approx(13.0));
    CHECK(d.w.maxCoeff() == 1.0);
    seen.insert(std::vector<double>(d.w.data(), d.w.data() + d.w.size()));
  }
  CHECK(seen.size() >= 95);  // collisions are vanishingly rare

  auto again = random_designs(100, 13, 81, 0.02, 99);
  for (size_t i = 0; i < batch.size(); ++i) CHECK((batch[i].w - again[i].w).norm() == 0.0);

  auto full = random_designs(3, 81, 81, 0.02, 7);
  for (const auto& d : full) CHECK(d.w.minCoeff() == 1.0);

  CHECK_THROWS_AS(random_designs(1, 82, 81, 0.02, 7), std::invalid_argument);
}

TEST_CASE("fraction beaten counts strictly worse population values") {
  std::vector<double> pop{1.0, 2.0, 3.0, 4.0};
  CHECK(fraction_beaten(2.5, pop) == doctest::Approx(0.5));
  CHECK(fraction_beaten(0.0, pop) == doctest::Approx(1.0));
  CHECK(fraction_beaten(5.0, pop) == doctest::Approx(0.0));
  CHECK(fraction_beaten(2.0, pop) == doctest::Approx(0.5));  // ties do not count
  CHECK(fraction_beaten(1.0, {}) == 0.0);
}

TEST_CASE("comparison table mechanics: labels, shapes, identical twins") {
  Setup s = make_setup(8, 40, 5);
  auto goal = coed_criterion(s.f, 0.02);
  auto plain = classical_criterion(s.f, 0.02, std::numeric_limits<double>::quiet_NaN());
  auto g_goal = greedy_select(goal, 13, 81);

  auto sample = random_designs(50, 13, 81, 0.02, 31);
  auto table = compare_designs({{"a", g_goal.w}, {"b", g_goal.w}}, sample, {goal, plain});
  CHECK(table.values.rows() == 2);
  CHECK(table.values.cols() == 2);
  CHECK(table.labels == std::vector<std::string>{"a", "b"});
  CHECK(table.criteria == std::vector<std::string>{"goal_trace", "posterior_trace"});
  CHECK(table.values.row(0) == table.values.row(1));
  CHECK(table.percentiles.row(0) == table.percentiles.row(1));
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      CHECK(table.percentiles(r, c) >= 0.0);
      CHECK(table.percentiles(r, c) <= 1.0);
    }
}

TEST_CASE("default problem: each greedy design wins its own criterion") {
  // Flagship configuration: drift-rotation velocity, kappa=0.15, ambient at
  // the target value, enlarged control box. The goal-optimized design must
  // beat the parameter-optimized one on goal variance and vice versa.
  auto mesh = fem::build_mesh(30);
  auto ops = fem::assemble_operators(
      mesh, 0.15, [](double x, double y) { return Eigen::Vector2d{-y - 0.5, x - 0.5}; }, -1.0,
      1.0);
  auto steady = model::build_steady(ops);
  auto grid = fem::assemble_temporal(1.0, 20);
  Vec chi = fem::box_indicator(mesh, 0.25, 0.25, 0.55, 0.55);
  auto transient = model::build_transient(ops, grid, chi);
  auto map = model::build_terminal_map(steady, transient);
  bayes::InverseProblem ip;
  ip.prior = bayes::build_prior(ops, 0.1, 1.0, Vec());
  ip.obs = bayes::build_observations(mesh, steady, 9, 9);
  ip.steady = steady;
  int N = ip.dim();
  Vec m_true(N);
  for (int i = 0; i < N; ++i) {
    double x = mesh.nodes(i, 0), y = mesh.nodes(i, 1);
    auto d2 = [&](double cx, double cy) { return (x - cx) * (x - cx) + (y - cy) * (y - cy); };
    m_true[i] = 6.0 * std::exp(-d2(0.3, 0.7) / 0.02) - 4.0 * std::exp(-d2(0.75, 0.3) / 0.02);
  }
  auto synth = ip.synthesize(m_true, 0.01, rng::Stream::substream(42, "noise"));

  lowrank::ForwardOps fwd;
  fwd.F = [&](const Vec& v) { return ip.apply_F(v); };
  fwd.Ft = [&](const Vec& v) { return ip.apply_Ft(v); };
  fwd.A = [&](const Vec& v) { return map.apply_A(v); };
  fwd.n_y = ip.obs.count();
  auto f = lowrank::build_frozen_svd(fwd, ip.prior, 60, 5, rng::Stream::substream(42, "sketch"));

  auto goal = coed_criterion(f, synth.sigma);
  auto plain = classical_criterion(f, synth.sigma, std::numeric_limits<double>::quiet_NaN());
  auto g_goal = greedy_select(goal, 13, 81);
  auto g_plain = greedy_select(plain, 13, 81);

  // offsets are design-independent, so raw evaluator values order identically
  CHECK(goal.evaluator(g_goal.w) < goal.evaluator(g_plain.w));
  CHECK(plain.evaluator(g_plain.w) <= plain.evaluator(g_goal.w));

  auto sample = random_designs(200, 13, 81, synth.sigma, 31);
  auto table = compare_designs({{"goal", g_goal.w}, {"classical", g_plain.w}}, sample,
                               {goal, plain});
  CHECK(table.percentiles(0, 0) >= 0.95);  // goal design vs goal criterion
  CHECK(table.percentiles(1, 1) >= 0.95);  // classical design vs its criterion
}
