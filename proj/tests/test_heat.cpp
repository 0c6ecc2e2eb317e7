#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "coed/heat.hpp"
#include "coed/rng.hpp"
#include "oracles.hpp"

using namespace coed;
using namespace coed::model;

namespace {

Eigen::Vector2d rotation(double x, double y) { return {0.5 - y, x - 0.5}; }

struct Setup {
  fem::Mesh mesh;
  fem::FEOperators ops;
  fem::TemporalGrid grid;
  SteadyModel steady;
  TransientModel transient;
  TerminalMap map;
};

Setup make_setup(int n, int nt, double gamma_a = 0.0) {
  Setup s;
  s.mesh = fem::build_mesh(n);
  s.ops = fem::assemble_operators(s.mesh, 0.05, rotation, -1.0, gamma_a);
  s.grid = fem::assemble_temporal(1.0, nt);
  s.steady = build_steady(s.ops);
  Vec chi = fem::box_indicator(s.mesh, 0.25, 0.25, 0.45, 0.45);
  s.transient = build_transient(s.ops, s.grid, chi);
  s.map = build_terminal_map(s.steady, s.transient);
  return s;
}

}  // namespace

TEST_CASE("steady solve: zero source and ambient give zero state") {
  Setup s = make_setup(6, 4);
  Vec u = s.steady.solve(Vec::Zero(s.steady.dim()));
  CHECK(u.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("steady solve: pure ambient heating equilibrates at gamma_a") {
  Setup s = make_setup(6, 4, 2.0);
  Vec u = s.steady.solve(Vec::Zero(s.steady.dim()));
  CHECK((u.array() - 2.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("steady solve matches dense direct oracle") {
  Setup s = make_setup(10, 4, 0.7);
  rng::Stream rs(123);
  Vec m = rng::normal_vector(rs, s.steady.dim());
  Vec u = s.steady.solve(m);

  Mat A = Mat(s.steady.A_st);
  Vec want = A.ldlt().solve(s.steady.M * m + s.steady.g);
  CHECK(oracles::rel_err(u, want) < 1e-10);
}

TEST_CASE("steady residual invariant") {
  Setup s = make_setup(9, 4, 1.3);
  rng::Stream rs(7);
  Vec m = rng::normal_vector(rs, s.steady.dim());
  Vec u = s.steady.solve(m);
  Vec resid = s.steady.A_st * u - s.steady.M * m - s.steady.g;
  CHECK(resid.norm() <= 1e-10 * (s.steady.M * m + s.steady.g).norm());
}

TEST_CASE("transient: zero data stays zero") {
  Setup s = make_setup(5, 6);
  Vec u = s.transient.terminal(Vec::Zero(s.transient.dim()), Vec(), Vec(), 1.0);
  CHECK(u.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("transient preserves its own equilibrium exactly") {
  Setup s = make_setup(8, 7, 0.9);
  rng::Stream rs(11);
  Vec m = rng::normal_vector(rs, s.transient.dim());

  SpMat spatial = s.ops.kappa * s.ops.K + s.ops.N_adv - s.ops.kappa * s.ops.gamma_h * s.ops.R;
  Mat dense = Mat(spatial);
  Vec u_eq = dense.lu().solve(s.ops.M * m + s.ops.g);

  Vec u = s.transient.terminal(u_eq, m, Vec(), 1.0);
  CHECK((u - u_eq).norm() <= 1e-10 * u_eq.norm());
}

TEST_CASE("transient single step matches dense oracle") {
  Setup s = make_setup(7, 1, 0.4);
  rng::Stream rs(21);
  int n = s.transient.dim();
  Vec u0 = rng::normal_vector(rs, n);
  Vec m = rng::normal_vector(rs, n);
  Vec z(1);
  z << 1.7;

  Mat Ai = Mat(s.transient.A_impl);
  double dt = s.grid.dt;
  Vec rhs = s.ops.M * u0 + dt * (s.ops.M * m + z[0] * (s.ops.M * s.transient.chi_c) + s.ops.g);
  Vec want = Ai.lu().solve(rhs);
  Vec got = s.transient.terminal(u0, m, z, 1.0);
  CHECK(oracles::rel_err(got, want) < 1e-12);
}

TEST_CASE("terminal map superposition") {
  Setup s = make_setup(8, 5, 1.1);
  rng::Stream rs(31);
  Vec m = rng::normal_vector(rs, s.map.state_dim());
  Vec z = rng::normal_vector(rs, s.map.control_dim());
  Vec direct = s.map.apply(m, z);
  Vec parts = s.map.apply_A(m) + s.map.apply_B(z) + s.map.q;
  CHECK(oracles::rel_err(parts, direct) < 1e-11);
}

TEST_CASE("terminal offset is the zero-input terminal state") {
  Setup s = make_setup(6, 5, 0.8);
  Vec q2 = s.map.apply(Vec::Zero(s.map.state_dim()), Vec::Zero(s.map.control_dim()));
  CHECK(oracles::rel_err(q2, s.map.q) < 1e-12);
}

TEST_CASE("terminal offset ignores the control region") {
  Setup a = make_setup(6, 5, 0.8);
  fem::Mesh mesh = fem::build_mesh(6);
  auto ops = fem::assemble_operators(mesh, 0.05, rotation, -1.0, 0.8);
  auto grid = fem::assemble_temporal(1.0, 5);
  auto steady = build_steady(ops);
  auto transient = build_transient(ops, grid, fem::box_indicator(mesh, 0.5, 0.5, 0.9, 0.9));
  auto map = build_terminal_map(steady, transient);
  CHECK(oracles::rel_err(map.q, a.map.q) < 1e-14);
}

TEST_CASE("parameter map adjoint identity in the mass inner product") {
  Setup s = make_setup(10, 6);
  rng::Stream rs(41);
  for (int trial = 0; trial < 3; ++trial) {
    Vec m = rng::normal_vector(rs, s.map.state_dim());
    Vec u = rng::normal_vector(rs, s.map.state_dim());
    double lhs = (s.map.apply_A(m)).dot(s.ops.M * u);
    double rhs = m.dot(s.ops.M * s.map.apply_At(u));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(std::abs(lhs), std::abs(rhs)));
  }
}

TEST_CASE("control map adjoint identity between mass and time inner products") {
  Setup s = make_setup(10, 6);
  rng::Stream rs(43);
  for (int trial = 0; trial < 3; ++trial) {
    Vec z = rng::normal_vector(rs, s.map.control_dim());
    Vec u = rng::normal_vector(rs, s.map.state_dim());
    double lhs = (s.map.apply_B(z)).dot(s.ops.M * u);
    double rhs = s.grid.weighted_dot(z, s.map.apply_Bt(u));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(std::abs(lhs), std::abs(rhs)));
  }
}

TEST_CASE("dense adjoint equals weighted transpose") {
  Setup s = make_setup(5, 4);
  int n = s.map.state_dim();
  Mat A = oracles::dense_matrix([&](const Vec& v) { return s.map.apply_A(v); }, n);
  Mat At = oracles::dense_matrix([&](const Vec& v) { return s.map.apply_At(v); }, n);
  Mat Mm = Mat(s.ops.M);
  Mat want = Mm.ldlt().solve(A.transpose() * Mm);
  CHECK(oracles::rel_err(At, want) < 1e-10);

  int nt = s.map.control_dim();
  Mat B = oracles::dense_matrix([&](const Vec& v) { return s.map.apply_B(v); }, nt);
  Mat Bt = oracles::dense_matrix([&](const Vec& v) { return s.map.apply_Bt(v); }, n);
  Mat want_bt = (B.transpose() * Mm) / s.grid.dt;
  CHECK(oracles::rel_err(Bt, want_bt) < 1e-10);
}

TEST_CASE("trajectory bookkeeping") {
  Setup s = make_setup(5, 6, 0.3);
  rng::Stream rs(51);
  Vec u0 = rng::normal_vector(rs, s.transient.dim());
  Vec m = rng::normal_vector(rs, s.transient.dim());
  Vec z = rng::normal_vector(rs, s.grid.nt);
  Mat traj = s.transient.trajectory(u0, m, z);
  CHECK(traj.rows() == s.grid.nt + 1);
  CHECK((traj.row(0).transpose() - u0).norm() == 0.0);
  Vec term = s.transient.terminal(u0, m, z, 1.0);
  CHECK(oracles::rel_err(Vec(traj.row(s.grid.nt).transpose()), term) < 1e-14);
}

TEST_CASE("factored operators are reused across solves") {
  Setup s = make_setup(6, 8);
  rng::Stream rs(61);
  Vec m = rng::normal_vector(rs, s.map.state_dim());
  Vec z = rng::normal_vector(rs, s.map.control_dim());
  uint64_t before = linalg::solve_count();
  s.map.apply(m, z);
  uint64_t after = linalg::solve_count();
  // one steady solve plus nt implicit steps, nothing else
  CHECK(after - before == static_cast<uint64_t>(s.grid.nt + 1));
}

TEST_CASE("input validation") {
  Setup s = make_setup(5, 4);
  CHECK_THROWS_AS(s.steady.solve(Vec::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(s.transient.terminal(Vec::Zero(3), Vec(), Vec(), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(s.transient.terminal(Vec::Zero(s.transient.dim()), Vec(), Vec::Zero(7), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_transient(s.ops, s.grid, Vec::Zero(s.transient.dim())), ConfigError);
}
