#pragma once

#include <limits>
#include <optional>

#include "coed/bayes.hpp"
#include "coed/linalg.hpp"
#include "coed/rng.hpp"
#include "coed/types.hpp"

namespace coed::lowrank {

// Handles to the forward machinery, passed as plain callables so callers can
// wrap them with counters or stubs. F maps parameter -> data, Ft is its
// adjoint under the mass-matrix inner product, A maps parameter -> state.
struct ForwardOps {
  linalg::ApplyFn F;
  linalg::ApplyFn Ft;
  linalg::ApplyFn A;
  int n_y = 0;
};

// Design-independent factorization of the prior-preconditioned data map
// F Gamma^{1/2} ~= U_F V_F^*, with the goal-operator images precomputed so
// that design criteria reduce to small dense algebra with no PDE solves.
struct FrozenSVD {
  Mat U_F;           // n_y x k, orthonormal data-space directions
  Mat V_F;           // N x k, right vectors scaled by singular values
  Mat gram_V;        // k x k, V_F^* V_F (mass-weighted)
  Mat A_tilde;       // N x k, goal images A Gamma^{1/2} V_F
  Mat gram_A;        // k x k, A_tilde^* A_tilde (mass-weighted)
  Mat prior_images;  // N x k, Gamma^{1/2} V_F
  Mat gram_prior;    // k x k, prior_images^* prior_images
  int k_f = 0;
  int p = 0;
  // tr(A Gamma_pr A^*): design-invariant shift turning the reduced criterion
  // into the full goal-variance trace. NaN until supplied by the caller.
  double trace_prior_goal = std::numeric_limits<double>::quiet_NaN();
};

// Leading eigenpairs of the misfit Hessian for one fixed design.
struct SpectralDecomp {
  Mat V_h;        // N x r, mass-orthonormal eigenvectors
  Vec lambda;     // r nonincreasing eigenvalues, >= 0
  Vec d_shrink;   // lambda_i / (lambda_i + 1)
  Vec design_w;   // the weights this decomposition was built for
  double sigma = 0.0;
  int rank() const { return static_cast<int>(lambda.size()); }
};

// Randomized positive-semidefinite sketch: trace and squared-trace estimates
// plus a leave-one-out error estimate, with internal probe doubling until the
// estimate is below 1% of the trace or the probe count reaches the dimension.
struct NystromSketch {
  double trace = 0.0;
  double trace_sq = 0.0;   // estimate of tr(op^2) from the same sketch
  double err_est = 0.0;    // estimated trace mass missed by the sketch
  int probes = 0;          // probes actually used
  Vec eigenvalues;         // nonzero sketch eigenvalues, nonincreasing
};

FrozenSVD build_frozen_svd(const ForwardOps& fwd, const bayes::Prior& prior, int k_f, int p,
                           rng::Stream stream);

// Symmetric k x k shrinkage core S = (C_w gram_V + I)^{-1} C_w for a design;
// the posterior correction in the frozen basis. Exposed for reuse by the
// uncertainty propagation layer.
Mat shrinkage(const FrozenSVD& f, const bayes::Design& d);

struct CritValue {
  double psi_minus = 0.0;            // design-dependent part (<= 0)
  std::optional<double> psi_full;    // full trace when the invariant part is known
};

CritValue eval_coed_frozen(const FrozenSVD& f, const bayes::Design& d);
double eval_classical_A_frozen(const FrozenSVD& f, const bayes::Design& d);

Vec apply_postcov_frozen(const FrozenSVD& f, const bayes::Prior& prior, const bayes::Design& d,
                         const Vec& v);

// Nodal variances of the posterior Gaussian field: prior diagonal (one
// triangular solve per node) minus the frozen low-rank correction. The prior
// diagonal is returned too when requested.
Vec pointwise_variance_frozen(const FrozenSVD& f, const bayes::Prior& prior,
                              const bayes::Design& d, Vec* prior_diag = nullptr);

SpectralDecomp build_spectral(const bayes::Design& d, const bayes::Prior& prior,
                              const ForwardOps& fwd, int k_h, rng::Stream stream);

double eval_coed_spectral(const SpectralDecomp& sd, const ForwardOps& fwd,
                          const bayes::Prior& prior);

// Trace estimation for an operator that is self-adjoint PSD under the given
// metric (nullptr = Euclidean). draw_probe must sample the rotation-invariant
// distribution of that geometry; nullptr draws standard Gaussians.
NystromSketch nystrom_trace(const linalg::ApplyFn& op, int dim, const SpMat* metric,
                            const std::function<Vec(rng::Stream&)>& draw_probe, int probes,
                            rng::Stream stream);

}  // namespace coed::lowrank
