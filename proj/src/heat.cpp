#include "coed/heat.hpp"

namespace coed::model {

Vec SteadyModel::solve(const Vec& m) const {
  if (m.size() != A_st.rows()) throw std::invalid_argument("SteadyModel::solve: bad source size");
  return solver.solve(M * m + g);
}

Vec SteadyModel::apply_S(const Vec& m) const {
  if (m.size() != A_st.rows()) throw std::invalid_argument("SteadyModel::apply_S: bad source size");
  return solver.solve(M * m);
}

SteadyModel build_steady(const fem::FEOperators& ops) {
  SteadyModel s;
  s.A_st = ops.kappa * ops.K - ops.kappa * ops.gamma_h * ops.R;
  s.A_st.makeCompressed();
  s.M = ops.M;
  s.g = ops.g;
  s.solver = linalg::CholeskySolver(s.A_st, "steady");
  s.offset = s.solver.solve(s.g);
  return s;
}

Vec TransientModel::terminal(const Vec& u0, const Vec& m, const Vec& z, double scale_g) const {
  int n = dim();
  if (u0.size() != n) throw std::invalid_argument("TransientModel: bad initial state size");
  if (m.size() != 0 && m.size() != n) throw std::invalid_argument("TransientModel: bad source size");
  if (z.size() != 0 && z.size() != grid.nt) {
    throw std::invalid_argument("TransientModel: control must have one value per step");
  }
  Vec u = u0;
  Vec source = Vec::Zero(n);
  if (m.size() == n) source = grid.dt * (M * m);
  if (scale_g != 0.0) source += (grid.dt * scale_g) * g;
  Vec chi_m = M * chi_c;
  for (int k = 0; k < grid.nt; ++k) {
    Vec rhs = M * u + source;
    if (z.size() != 0) rhs += (grid.dt * z[k]) * chi_m;
    u = solver.solve(rhs);
  }
  return u;
}

Mat TransientModel::trajectory(const Vec& u0, const Vec& m, const Vec& z) const {
  int n = dim();
  Mat out(grid.nt + 1, n);
  Vec u = u0;
  out.row(0) = u.transpose();
  Vec source = Vec::Zero(n);
  if (m.size() == n) source = grid.dt * (M * m);
  source += grid.dt * g;
  Vec chi_m = M * chi_c;
  for (int k = 0; k < grid.nt; ++k) {
    Vec rhs = M * u + source;
    if (z.size() != 0) rhs += (grid.dt * z[k]) * chi_m;
    u = solver.solve(rhs);
    out.row(k + 1) = u.transpose();
  }
  return out;
}

TransientModel build_transient(const fem::FEOperators& ops, const fem::TemporalGrid& grid,
                               const Vec& chi_c) {
  if (chi_c.size() != ops.M.rows()) {
    throw std::invalid_argument("build_transient: control indicator size mismatch");
  }
  if (chi_c.cwiseAbs().sum() == 0.0) {
    throw ConfigError("build_transient: control region contains no mesh nodes");
  }
  TransientModel t;
  t.grid = grid;
  t.M = ops.M;
  t.chi_c = chi_c;
  t.g = ops.g;
  SpMat spatial = ops.kappa * ops.K + ops.N_adv - ops.kappa * ops.gamma_h * ops.R;
  t.A_impl = t.M + grid.dt * spatial;
  t.A_impl.makeCompressed();
  t.solver = linalg::LuSolver(t.A_impl, "transient");
  return t;
}

Vec TerminalMap::apply_A(const Vec& m) const {
  Vec u0 = steady.apply_S(m);
  return transient.terminal(u0, m, Vec(), 0.0);
}

Vec TerminalMap::apply_At(const Vec& u) const {
  if (u.size() != state_dim()) throw std::invalid_argument("apply_At: bad state size");
  const auto& grid = transient.grid;
  Vec lambda = transient.M * u;
  Vec acc = Vec::Zero(u.size());
  for (int k = 0; k < grid.nt; ++k) {
    Vec mu = transient.solver.solve_transpose(lambda);
    acc += grid.dt * mu;
    lambda = transient.M * mu;
  }
  return steady.solver.solve(lambda) + acc;
}

Vec TerminalMap::apply_B(const Vec& z) const {
  Vec u0 = Vec::Zero(state_dim());
  return transient.terminal(u0, Vec(), z, 0.0);
}

Vec TerminalMap::apply_Bt(const Vec& u) const {
  if (u.size() != state_dim()) throw std::invalid_argument("apply_Bt: bad state size");
  const auto& grid = transient.grid;
  Vec lambda = transient.M * u;
  Vec z(grid.nt);
  for (int j = 1; j <= grid.nt; ++j) {
    Vec mu = transient.solver.solve_transpose(lambda);
    z[grid.nt - j] = transient.chi_c.dot(transient.M * mu);
    lambda = transient.M * mu;
  }
  return z;
}

Vec TerminalMap::apply(const Vec& m, const Vec& z) const {
  Vec u0 = steady.solve(m);
  return transient.terminal(u0, m, z, 1.0);
}

TerminalMap build_terminal_map(const SteadyModel& steady, const TransientModel& transient) {
  TerminalMap map;
  map.steady = steady;
  map.transient = transient;
  Vec zero = Vec::Zero(steady.dim());
  map.q = transient.terminal(steady.offset, zero, Vec(), 1.0);
  return map;
}

}  // namespace coed::model
