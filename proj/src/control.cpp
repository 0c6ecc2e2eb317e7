#include "coed/control.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace coed::control {

ControlProblem build_control(const model::TerminalMap& map, const Vec& u_bar, double beta_reg) {
  if (!(beta_reg > 0.0)) throw ConfigError("control: beta_reg must be positive");
  if (u_bar.size() != map.state_dim()) {
    throw std::invalid_argument("control: target length does not match the state dimension");
  }
  ControlProblem p{map, u_bar, beta_reg, {}};
  const int nt = map.control_dim();
  std::vector<Triplet> trips;
  trips.reserve(nt);
  for (int k = 0; k < nt; ++k) {
    trips.emplace_back(k, k, map.transient.grid.weights[k]);
  }
  p.Mt.resize(nt, nt);
  p.Mt.setFromTriplets(trips.begin(), trips.end());
  return p;
}

NominalControl solve_optimal_control(const ControlProblem& problem, const Vec& m) {
  if (m.size() != problem.state_dim()) {
    throw std::invalid_argument("solve_optimal_control: parameter length mismatch");
  }
  const auto& map = problem.map;
  Vec gap = problem.u_bar - map.q - map.apply_A(m);
  Vec rhs = map.apply_Bt(gap);
  linalg::CgOptions opts;
  opts.rel_tol = 1e-10;
  opts.max_iter = 10 * problem.control_dim() + 50;
  Vec z = linalg::conjugate_gradient(
      [&](const Vec& v) -> Vec { return map.apply_Bt(map.apply_B(v)) + problem.beta_reg * v; },
      rhs, &problem.Mt, opts);
  NominalControl out;
  out.z_star = z;
  out.m_source = m;
  out.objective_at_source = control_objective(problem, m, z);
  return out;
}

double control_objective(const ControlProblem& problem, const Vec& m, const Vec& z) {
  Vec r = problem.map.apply(m, z) - problem.u_bar;
  return 0.5 * linalg::weighted_dot(r, r, &problem.map.transient.M);
}

double regularized_objective(const ControlProblem& problem, const Vec& m, const Vec& z) {
  return control_objective(problem, m, z) +
         0.5 * problem.beta_reg * linalg::weighted_dot(z, z, &problem.Mt);
}

double improvement(const ControlProblem& problem, const Vec& m, const Vec& z) {
  Vec u0 = problem.map.steady.solve(m) - problem.u_bar;
  double base = std::sqrt(linalg::weighted_dot(u0, u0, &problem.map.transient.M));
  double with = std::sqrt(2.0 * control_objective(problem, m, z));
  if (base == 0.0) return 0.0;
  return 1.0 - with / base;
}

bayes::GaussianBelief terminal_state_law(const ControlProblem& problem,
                                         const bayes::GaussianBelief& posterior,
                                         const Vec& z_star) {
  bayes::GaussianBelief law;
  law.kind = posterior.kind;
  law.mean = problem.map.apply(posterior.mean, z_star);
  const model::TerminalMap map = problem.map;  // shared factorizations, cheap copy
  auto inner = posterior.cov_apply;
  law.cov_apply = [map, inner](const Vec& v) -> Vec {
    if (!inner) return Vec::Zero(v.size());
    return map.apply_A(inner(map.apply_At(v)));
  };
  return law;
}

Vec pointwise_variance(const bayes::GaussianBelief& law, const linalg::CholeskySolver& mass_solver,
                       int dim) {
  Vec var(dim);
  Vec e = Vec::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    e[i] = 1.0;
    Vec col = law.cov_apply(mass_solver.solve(e));
    var[i] = std::max(0.0, col[i]);
    e[i] = 0.0;
  }
  return var;
}

Vec reachable_target(const model::TerminalMap& map, const Vec& m_pr, const Vec& z0,
                     const Vec& sample) {
  Vec m = m_pr.size() ? m_pr : Vec::Zero(map.state_dim());
  if (sample.size()) m += sample;
  return map.apply(m, z0);
}

}  // namespace coed::control
