#pragma once

#include <vector>

#include "coed/heat.hpp"
#include "coed/linalg.hpp"
#include "coed/rng.hpp"
#include "coed/types.hpp"

namespace coed::bayes {

// Gaussian prior with squared-inverse-elliptic covariance:
//   cov^{1/2} = (alpha K + beta M)^{-1} M,
// self-adjoint in the mass inner product. Euclidean covariance matrix is
// L^{-1} M L^{-1} with L = alpha K + beta M.
struct Prior {
  SpMat M;
  SpMat L;
  Vec mean;
  double alpha = 0.0;
  double beta = 0.0;
  linalg::CholeskySolver L_solver;
  linalg::CholeskySolver M_solver;

  Vec apply_sqrt(const Vec& v) const;
  Vec apply_cov(const Vec& v) const;
  Vec apply_cov_inv(const Vec& v) const;

  // White noise for the mass inner product (covariance M^{-1}).
  Vec white(rng::Stream& s) const;
  Vec sample(rng::Stream& s) const;

  int dim() const { return static_cast<int>(M.rows()); }
};

Prior build_prior(const fem::FEOperators& ops, double alpha, double beta, const Vec& mean);

// Pointwise observation of the steady state at a grid of sensor nodes.
struct ObservationOperator {
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords;
  std::vector<int> nodes;
  Vec b;  // offset: steady ambient response sampled at the sensors

  int count() const { return static_cast<int>(nodes.size()); }
  Vec select(const Vec& u) const;
  Vec scatter(const Vec& y, int dim) const;
};

// rows x cols interior sensor grid at ((i+1)/(cols+1), (j+1)/(rows+1)),
// snapped to nearest mesh nodes.
ObservationOperator build_observations(const fem::Mesh& mesh, const model::SteadyModel& steady,
                                       int rows, int cols);

// Binary sensor activation plus the noise level the data was produced with.
struct Design {
  Vec w;
  double sigma = 0.0;

  int active() const;
  void validate(int n_s) const;
  static Design all_on(int n_s, double sigma);
  static Design from_indices(int n_s, const std::vector<int>& idx, double sigma);
};

struct SynthesisResult {
  Vec y;
  double sigma;
};

// The forward model, prior and observations bundled; all posterior-side
// operations run matrix-free through factored sparse operators.
struct InverseProblem {
  Prior prior;
  ObservationOperator obs;
  model::SteadyModel steady;

  Vec apply_F(const Vec& m) const;   // observe the steady response of m
  Vec apply_Ft(const Vec& y) const;  // adjoint for (M, Euclidean) pairing

  // Prior-preconditioned data misfit: v -> cov^{1/2} F^* W F cov^{1/2} v.
  Vec misfit_apply(const Design& d, const Vec& v) const;

  // Full-grid noisy data from the true parameter; sigma is scaled to the
  // requested relative noise level delta.
  SynthesisResult synthesize(const Vec& m_true, double delta, rng::Stream noise) const;

  // MAP point by CG on the prior-preconditioned normal equations.
  Vec compute_map(const Design& d, const Vec& y, linalg::CgReport* report = nullptr) const;

  // Exact posterior covariance action (nested CG solve per application).
  Vec apply_postcov(const Design& d, const Vec& v) const;

  int dim() const { return prior.dim(); }
};

enum class CovKind { Prior, PosteriorExact, PosteriorFrozen, PosteriorSpectral, Dense };

struct GaussianBelief {
  Vec mean;
  CovKind kind = CovKind::Prior;
  linalg::ApplyFn cov_apply;
};

GaussianBelief posterior_belief(const InverseProblem& ip, const Design& d, const Vec& y);

// Dense posterior (small meshes): Euclidean covariance and its Cholesky
// factor, used for exact sampling and as the CLI exact mode.
struct DensePosterior {
  Vec m_map;
  Mat cov;     // (F^T W F + L M^{-1} L)^{-1}
  Mat factor;  // lower Cholesky of cov
};

DensePosterior dense_posterior(const InverseProblem& ip, const Design& d, const Vec& y);

// count iid posterior samples as columns: m_map + factor * xi.
Mat sample_posterior_dense(const DensePosterior& post, int count, rng::Stream s);

}  // namespace coed::bayes
