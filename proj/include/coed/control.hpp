#pragma once

#include "coed/bayes.hpp"
#include "coed/heat.hpp"
#include "coed/linalg.hpp"
#include "coed/types.hpp"

namespace coed::control {

// Tracking problem for the terminal state: drive u_T(m, z) = A m + B z + q
// toward the target u_bar with Tikhonov weight beta_reg on the control energy.
struct ControlProblem {
  model::TerminalMap map;
  Vec u_bar;
  double beta_reg = 1e-5;
  SpMat Mt;  // temporal mass (diagonal), the control-space inner product

  int control_dim() const { return map.control_dim(); }
  int state_dim() const { return map.state_dim(); }
};

ControlProblem build_control(const model::TerminalMap& map, const Vec& u_bar, double beta_reg);

struct NominalControl {
  Vec z_star;
  Vec m_source;
  double objective_at_source = 0.0;  // non-regularized misfit at (m_source, z_star)
};

// Normal equations (B^*B + beta I) z = B^*(u_bar - q - A m) solved by CG in
// the temporal-mass inner product.
NominalControl solve_optimal_control(const ControlProblem& problem, const Vec& m);

// Non-regularized tracking misfit 0.5 ||A m + B z + q - u_bar||^2_M.
double control_objective(const ControlProblem& problem, const Vec& m, const Vec& z);

// Regularized objective of the minimization itself (misfit + penalty).
double regularized_objective(const ControlProblem& problem, const Vec& m, const Vec& z);

// How much closer the controlled terminal state is to the target than the
// initial state was: 1 - ||u_T(m, z) - u_bar|| / ||u(0) - u_bar|| in the mass
// norm, with u(0) the steady initial state of m.
double improvement(const ControlProblem& problem, const Vec& m, const Vec& z);

// Gaussian law of the terminal state under a parameter belief and a fixed
// control: mean A m + B z + q, covariance A cov A^*.
bayes::GaussianBelief terminal_state_law(const ControlProblem& problem,
                                         const bayes::GaussianBelief& posterior, const Vec& z_star);

// Nodal variances diag of the Euclidean covariance matrix of the law,
// extracted by dense probing: var_i = (C M^{-1})_ii.
Vec pointwise_variance(const bayes::GaussianBelief& law, const linalg::CholeskySolver& mass_solver,
                       int dim);

// Target that is exactly attainable: u_T(m_pr + sample, z0).
Vec reachable_target(const model::TerminalMap& map, const Vec& m_pr, const Vec& z0,
                     const Vec& sample);

}  // namespace coed::control
