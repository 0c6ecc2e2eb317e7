#pragma once

#include <cstdint>

#include <Eigen/Cholesky>

#include "coed/bayes.hpp"
#include "coed/control.hpp"
#include "coed/lowrank.hpp"
#include "coed/types.hpp"

namespace coed::uq {

// Posterior mean and variance of the non-regularized tracking objective
// 0.5 ||A m + B z* + q - u_bar||^2_M when the parameter m follows a Gaussian
// belief. Both moments split into a trace part and a part weighted by the
// residual at the belief mean.
struct ObjectiveMoments {
  double mean = 0.0;
  double variance = 0.0;
  double trace_sq_term = 0.0;       // tr[(A cov A*)^2] in the mass geometry
  double weighted_norm_term = 0.0;  // <A* r, cov A* r>_M, r = u_T(mean, z*) - u_bar
  double psi_cA = 0.0;              // tr(A cov A*), supplied by the caller
};

// Tail bounds for the objective on a grid of deviations plus the
// high-probability radius for one requested confidence level.
struct ConcentrationReport {
  Vec tau_grid;
  Vec bound_values;
  double C = 0.0;  // sqrt(weighted_norm_term), scale of the linear term
  double delta = 0.0;
  double delta_radius = 0.0;
};

// Closed-form moments of the control objective under the belief. psi_cA and
// trace_sq must be tr(A cov A*) and tr[(A cov A*)^2] for the same belief;
// the residual terms are evaluated through the belief's covariance action.
//   mean     = psi_cA / 2 + 0.5 ||u_T(mean, z*) - u_bar||^2_M
//   variance = trace_sq / 2 + weighted_norm_term
// Throws NumericalError if the assembled variance is below -1e-10; smaller
// negative roundoff is clamped to zero.
ObjectiveMoments objective_moments(const bayes::GaussianBelief& posterior,
                                   const control::ControlProblem& problem, const Vec& z_star,
                                   double psi_cA, double trace_sq);

// tr[(A cov_post A*)^2] from the frozen factorization: the design-invariant
// prior term minus twice a cross term plus the squared correction,
//   trace_sq_prior - 2 tr(S G^T M G) + tr[(S gram_A)^2],
// where S is the shrinkage core of the design and G collects the prior-sqrt
// goal-adjoint images of the frozen goal columns (k_f adjoint sweeps, no
// per-design PDE solves beyond them). trace_sq_prior is tr[(A cov_pr A*)^2],
// e.g. the squared-trace estimate of the randomized sketch.
double goal_trace_sq_frozen(const lowrank::FrozenSVD& f, const bayes::Design& d,
                            const model::TerminalMap& map, const bayes::Prior& prior,
                            double trace_sq_prior);

// k_f x k_f Gram of the prior-sqrt goal-adjoint images of the frozen goal
// columns, the design-independent heart of the squared-trace expansion
// (k_f goal-adjoint sweeps, done once).
Mat goal_cross_gram(const lowrank::FrozenSVD& f, const model::TerminalMap& map,
                    const bayes::Prior& prior);

// Same expansion with the cross Gram precomputed: small dense algebra only.
double goal_trace_sq_reduced(const lowrank::FrozenSVD& f, const bayes::Design& d,
                             const Mat& cross_gram, double trace_sq_prior);

// Design-independent reduction of the moment formulas: dense control images
// with the prefactored regularized normal matrix, the frozen cross Gram and
// the prior traces. With it, moments for one design cost one MAP solve, one
// goal sweep, one goal-adjoint sweep and small dense algebra, which makes
// scanning hundreds of candidate designs practical.
struct MomentsWorkspace {
  Mat B_cols;  // state images of the unit temporal controls
  Eigen::LLT<Mat> H_llt;  // factor of B^T M B + beta_reg Mt
  Mat cross_gram;
  double psi_prior = 0.0;       // tr(A cov_pr A*)
  double trace_sq_prior = 0.0;  // tr[(A cov_pr A*)^2]
  Vec offset;                   // q - u_bar
};

MomentsWorkspace build_moments_workspace(const control::ControlProblem& problem,
                                         const lowrank::FrozenSVD& f, const bayes::Prior& prior,
                                         double psi_prior, double trace_sq_prior);

struct DesignMoments {
  ObjectiveMoments moments;
  Vec m_map;
  Vec z_star;
};

// Full per-design evaluation from raw data: MAP point, nominal control from
// the prefactored normal equations, criterion and squared trace from the
// frozen factorization, residual terms through the frozen covariance.
//
// Scan grade: the squared-trace expansion inherits the absolute error of
// trace_sq_prior as a design-independent offset (the expansion cancels terms
// of prior magnitude). Comparisons across designs are unaffected; for an
// accurate absolute variance of one design, sketch the posterior goal
// covariance directly (nystrom_trace of A cov_post A* through
// apply_postcov_frozen) and reassemble with the weighted norm term.
DesignMoments design_moments(const MomentsWorkspace& ws, const lowrank::FrozenSVD& f,
                             const bayes::InverseProblem& ip,
                             const control::ControlProblem& problem, const bayes::Design& d,
                             const Vec& y);

// P(|Phi - mean| >= tau) <= 4 exp[-(1/8) min{tau/psi, tau^2/psi^2, tau^2/C^2}]
// with C^2 = weighted_norm_term. A zero denominator drops its term from the
// min; with every term dropped the objective is deterministic and the bound
// is 0 for tau > 0 (and the vacuous 4 at tau = 0).
double concentration_bound(const ObjectiveMoments& moments, double tau);

// Deviation radius covering the objective with probability >= 1 - delta:
// sqrt(8 log(4/delta)) * max{sqrt(8 log(4/delta)) psi, psi, C}.
double confidence_radius(const ObjectiveMoments& moments, double delta);

// Bound values over a tau grid bundled with the radius for one delta.
ConcentrationReport concentration_report(const ObjectiveMoments& moments, const Vec& tau_grid,
                                         double delta);

struct QuadMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Moments of the quadratic form x^T N x for x ~ N(mu, Sigma), dense Euclidean
// toolkit: mean = tr(N Sigma) + mu^T N mu, variance = 2 tr[(N Sigma)^2]
// + 4 mu^T N Sigma N mu. Inputs must be symmetric positive semidefinite.
QuadMoments quad_moments(const Mat& N, const Mat& Sigma, const Vec& mu);

// Tail bound for the same quadratic form:
// 4 exp[-(1/8) min{t/sqrt(tr[(Sigma N)^2]), t^2/tr[(Sigma N)^2],
//                  t^2/((N mu)^T Sigma (N mu))}],
// with the same zero-denominator convention as concentration_bound.
double quad_concentration(const Mat& N, const Mat& Sigma, const Vec& mu, double t);

// Monte-Carlo estimate of the Bayes risk of the controlled terminal state:
// draw m from the prior, data y = F m + b + noise at the design's sensors,
// recover the MAP point and average ||goal(m_MAP - m)||^2_M over n_outer
// replicates. Per-replicate substreams and a pairwise reduction keep the
// value independent of thread count.
double bayes_risk_mc(const bayes::InverseProblem& ip, const linalg::ApplyFn& goal,
                     const bayes::Design& d, int n_outer, uint64_t seed, bool parallel = true);

}  // namespace coed::uq
