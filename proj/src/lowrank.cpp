#include "coed/lowrank.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace coed::lowrank {

namespace {

// Active-sensor factor of the noise-weighted data projection: rows are
// sqrt(w_i)/sigma times the corresponding row of U_F, so C_w = Ua^T Ua.
Mat active_rows(const Mat& U_F, const bayes::Design& d) {
  Mat Ua(d.active(), U_F.cols());
  int j = 0;
  for (int i = 0; i < d.w.size(); ++i) {
    if (d.w[i] > 0.0) Ua.row(j++) = (std::sqrt(d.w[i]) / d.sigma) * U_F.row(i);
  }
  return Ua;
}

// Shrinkage in the sensor subspace: S = Ua^T (Ua gram_V Ua^T + I)^{-1} Ua,
// realized through an eigendecomposition of the PSD core so no large
// ill-conditioned matrix is ever inverted directly.
struct ShrinkageCore {
  Mat P;  // (#active) x k: rows to be recombined
  Vec f;  // shrink factors 1/(theta_i + 1)
};

ShrinkageCore shrinkage_core(const Mat& U_F, const Mat& gram_V, const bayes::Design& d) {
  ShrinkageCore core;
  Mat Ua = active_rows(U_F, d);
  if (Ua.rows() == 0) {
    core.P = Mat::Zero(0, U_F.cols());
    core.f = Vec::Zero(0);
    return core;
  }
  Mat G_half = Ua * gram_V * Ua.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (G_half + G_half.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("shrinkage: eigensolver failed");
  Vec theta = eig.eigenvalues().cwiseMax(0.0);
  core.P = eig.eigenvectors().transpose() * Ua;
  core.f = (theta.array() + 1.0).inverse();
  return core;
}

// tr(S gram_X) without forming S.
double shrunk_trace(const ShrinkageCore& core, const Mat& gram_X) {
  double acc = 0.0;
  for (int i = 0; i < core.f.size(); ++i) {
    acc += core.f[i] * core.P.row(i).dot(gram_X * core.P.row(i).transpose());
  }
  return acc;
}

}  // namespace

Mat shrinkage(const FrozenSVD& f, const bayes::Design& d) {
  ShrinkageCore core = shrinkage_core(f.U_F, f.gram_V, d);
  Mat S = core.P.transpose() * core.f.asDiagonal() * core.P;
  return 0.5 * (S + S.transpose());
}

FrozenSVD build_frozen_svd(const ForwardOps& fwd, const bayes::Prior& prior, int k_f, int p,
                           rng::Stream stream) {
  const int n = prior.dim();
  const int n_y = fwd.n_y;
  if (k_f < 1 || p < 0) throw std::invalid_argument("build_frozen_svd: need k_f >= 1, p >= 0");
  const int l = k_f + p;
  if (l > std::min(n_y, n)) {
    throw std::invalid_argument("build_frozen_svd: k_f + p exceeds problem dimensions");
  }

  // Range sketch of the prior-preconditioned map's coimage with one pass of
  // subspace iteration, orthonormalizing at every half-step so the spread of
  // the singular spectrum is never squared inside a QR.
  Mat omega(n_y, l);
  for (int j = 0; j < l; ++j) omega.col(j) = rng::normal_vector(stream, n_y);
  Mat Y(n, l), T(n_y, l);
  for (int j = 0; j < l; ++j) Y.col(j) = prior.apply_sqrt(fwd.Ft(omega.col(j)));
  Mat Q = linalg::orthonormalize(Y, &prior.M);
  for (int j = 0; j < l; ++j) T.col(j) = fwd.F(prior.apply_sqrt(Q.col(j)));
  Mat P = linalg::orthonormalize(T, nullptr);
  for (int j = 0; j < l; ++j) Y.col(j) = prior.apply_sqrt(fwd.Ft(P.col(j)));
  Q = linalg::orthonormalize(Y, &prior.M);

  for (int j = 0; j < l; ++j) T.col(j) = fwd.F(prior.apply_sqrt(Q.col(j)));
  Eigen::JacobiSVD<Mat> svd(T, Eigen::ComputeThinU | Eigen::ComputeThinV);

  FrozenSVD out;
  out.k_f = k_f;
  out.p = p;
  out.U_F = svd.matrixU().leftCols(k_f);
  Mat V = Q * svd.matrixV().leftCols(k_f);
  out.V_F = V * svd.singularValues().head(k_f).asDiagonal();
  out.gram_V = out.V_F.transpose() * (prior.M * out.V_F);
  out.gram_V = 0.5 * (out.gram_V + out.gram_V.transpose()).eval();

  out.prior_images.resize(n, k_f);
  for (int j = 0; j < k_f; ++j) out.prior_images.col(j) = prior.apply_sqrt(out.V_F.col(j));
  out.gram_prior = out.prior_images.transpose() * (prior.M * out.prior_images);
  out.gram_prior = 0.5 * (out.gram_prior + out.gram_prior.transpose()).eval();

  out.A_tilde.resize(n, k_f);
  for (int j = 0; j < k_f; ++j) out.A_tilde.col(j) = fwd.A(out.prior_images.col(j));
  out.gram_A = out.A_tilde.transpose() * (prior.M * out.A_tilde);
  out.gram_A = 0.5 * (out.gram_A + out.gram_A.transpose()).eval();
  return out;
}

CritValue eval_coed_frozen(const FrozenSVD& f, const bayes::Design& d) {
  CritValue v;
  ShrinkageCore core = shrinkage_core(f.U_F, f.gram_V, d);
  v.psi_minus = -shrunk_trace(core, f.gram_A);
  if (std::isfinite(f.trace_prior_goal)) v.psi_full = f.trace_prior_goal + v.psi_minus;
  return v;
}

double eval_classical_A_frozen(const FrozenSVD& f, const bayes::Design& d) {
  ShrinkageCore core = shrinkage_core(f.U_F, f.gram_V, d);
  return -shrunk_trace(core, f.gram_prior);
}

Vec apply_postcov_frozen(const FrozenSVD& f, const bayes::Prior& prior, const bayes::Design& d,
                         const Vec& v) {
  d.validate(static_cast<int>(f.U_F.rows()));
  Vec out = prior.apply_cov(v);
  ShrinkageCore core = shrinkage_core(f.U_F, f.gram_V, d);
  if (core.f.size() == 0) return out;
  Vec c = core.P * (f.prior_images.transpose() * (prior.M * v));
  c.array() *= core.f.array();
  out.noalias() -= f.prior_images * (core.P.transpose() * c);
  return out;
}

Vec pointwise_variance_frozen(const FrozenSVD& f, const bayes::Prior& prior,
                              const bayes::Design& d, Vec* prior_diag) {
  const int n = prior.dim();
  Vec pr(n);
  Vec e = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    e.setZero();
    e[i] = 1.0;
    Vec x = prior.L_solver.solve(e);
    pr[i] = linalg::weighted_dot(x, x, &prior.M);
  }
  if (prior_diag) *prior_diag = pr;
  Mat S = shrinkage(f, d);
  Mat W = f.prior_images * S;
  Vec post = pr;
  for (int i = 0; i < n; ++i) post[i] -= W.row(i).dot(f.prior_images.row(i));
  return post;
}

SpectralDecomp build_spectral(const bayes::Design& d, const bayes::Prior& prior,
                              const ForwardOps& fwd, int k_h, rng::Stream stream) {
  SpectralDecomp sd;
  sd.design_w = d.w;
  sd.sigma = d.sigma;
  const int n = prior.dim();
  const int active = d.active();
  if (active == 0) {
    sd.V_h = Mat::Zero(n, 0);
    sd.lambda = Vec::Zero(0);
    sd.d_shrink = Vec::Zero(0);
    return sd;
  }
  if (k_h < 1 || k_h > active) {
    throw std::invalid_argument("build_spectral: need 1 <= k_h <= active sensor count");
  }

  auto op = [&](const Vec& v) -> Vec {
    Vec data = fwd.F(prior.apply_sqrt(v));
    data.array() *= d.w.array() / (d.sigma * d.sigma);
    return prior.apply_sqrt(fwd.Ft(data));
  };
  auto mdot = [&](const Vec& a, const Vec& b) { return linalg::weighted_dot(a, b, &prior.M); };

  // Lanczos in the mass inner product with full reorthogonalization; the
  // operator has rank <= active, so the Krylov space saturates quickly.
  const int max_steps = std::min(n, k_h + 10);
  std::vector<Vec> q;
  std::vector<double> alphas, betas;
  Vec v0 = rng::normal_vector(stream, n);
  v0 /= std::sqrt(mdot(v0, v0));
  q.push_back(v0);
  double scale = 0.0;
  for (int j = 0; j < max_steps; ++j) {
    Vec u = op(q[j]);
    if (j > 0) u -= betas[j - 1] * q[j - 1];
    double a = mdot(q[j], u);
    u -= a * q[j];
    alphas.push_back(a);
    scale = std::max(scale, std::abs(a));
    for (int pass = 0; pass < 2; ++pass) {
      Vec mu = prior.M * u;
      Vec corr = Vec::Zero(n);
      for (const Vec& qi : q) corr += qi.dot(mu) * qi;
      u -= corr;
    }
    double b = std::sqrt(std::max(0.0, mdot(u, u)));
    if (b <= 1e-13 * std::max(scale, 1e-300) || j + 1 == max_steps) break;
    betas.push_back(b);
    q.push_back(u / b);
  }

  const int m = static_cast<int>(alphas.size());
  if (m < k_h) throw NumericalError("build_spectral: Lanczos broke down before reaching k_h");
  Mat T = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = alphas[i];
    if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = betas[i];
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(T);
  if (eig.info() != Eigen::Success) throw NumericalError("build_spectral: eigensolver failed");

  sd.lambda = Vec(k_h);
  sd.V_h = Mat(n, k_h);
  Mat Q(n, m);
  for (int i = 0; i < m; ++i) Q.col(i) = q[i];
  for (int i = 0; i < k_h; ++i) {
    // eigenvalues ascend; take the top k_h in descending order
    int src = m - 1 - i;
    sd.lambda[i] = std::max(0.0, eig.eigenvalues()[src]);
    sd.V_h.col(i) = Q * eig.eigenvectors().col(src);
  }
  sd.d_shrink = sd.lambda.array() / (sd.lambda.array() + 1.0);
  return sd;
}

double eval_coed_spectral(const SpectralDecomp& sd, const ForwardOps& fwd,
                          const bayes::Prior& prior) {
  double acc = 0.0;
  for (int i = 0; i < sd.rank(); ++i) {
    Vec a = fwd.A(prior.apply_sqrt(sd.V_h.col(i)));
    acc += sd.d_shrink[i] * linalg::weighted_dot(a, a, &prior.M);
  }
  return -acc;
}

NystromSketch nystrom_trace(const linalg::ApplyFn& op, int dim, const SpMat* metric,
                            const std::function<Vec(rng::Stream&)>& draw_probe, int probes,
                            rng::Stream stream) {
  if (probes < 2) throw std::invalid_argument("nystrom_trace: need at least 2 probes");
  auto draw = [&](rng::Stream& s) -> Vec {
    if (draw_probe) return draw_probe(s);
    return rng::normal_vector(s, dim);
  };

  Mat omega(dim, 0), Y(dim, 0);
  NystromSketch sk;
  int target = std::min(probes, dim);
  for (;;) {
    int have = static_cast<int>(omega.cols());
    omega.conservativeResize(dim, target);
    Y.conservativeResize(dim, target);
    for (int j = have; j < target; ++j) {
      omega.col(j) = draw(stream);
      Y.col(j) = op(omega.col(j));
    }
    Mat MY = metric ? Mat(*metric * Y) : Y;
    Mat G = omega.transpose() * MY;
    G = 0.5 * (G + G.transpose()).eval();
    Mat K = Y.transpose() * MY;
    K = 0.5 * (K + K.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Mat> eig(G);
    if (eig.info() != Eigen::Success) throw NumericalError("nystrom_trace: eigensolver failed");
    Vec theta = eig.eigenvalues();
    double tmax = theta.cwiseAbs().maxCoeff();
    if (theta.minCoeff() < -1e-8 * std::max(tmax, 1e-300)) {
      throw ContractViolation("nystrom_trace: operator is not positive semidefinite");
    }
    double cut = tmax * 1e-13;
    Vec theta_inv = Vec::Zero(theta.size());
    Vec theta_half_inv = Vec::Zero(theta.size());
    for (int i = 0; i < theta.size(); ++i) {
      if (theta[i] > cut) {
        theta_inv[i] = 1.0 / theta[i];
        theta_half_inv[i] = 1.0 / std::sqrt(theta[i]);
      }
    }
    const Mat& E = eig.eigenvectors();
    Mat Gpinv = E * theta_inv.asDiagonal() * E.transpose();
    sk.trace = (Gpinv * K).trace();
    Mat core = E * theta_half_inv.asDiagonal() * E.transpose();
    Mat sym = core * K * core;  // same nonzero spectrum as the sketch operator
    Eigen::SelfAdjointEigenSolver<Mat> eig2(0.5 * (sym + sym.transpose()));
    sk.eigenvalues = eig2.eigenvalues().cwiseMax(0.0).reverse();
    sk.trace_sq = sk.eigenvalues.squaredNorm();
    sk.probes = target;

    if (target >= dim) {
      sk.err_est = 0.0;  // probes span the whole space: sketch is exact
      break;
    }
    // Leave-one-out: 1/(G^-1)_ii is probe i's energy not explained by the
    // others, an estimate of the trace the sketch is missing.
    double delta = std::max(tmax * 1e-12, -2.0 * std::min(0.0, theta.minCoeff()));
    Mat Greg = G + delta * Mat::Identity(G.rows(), G.cols());
    Mat Ginv = Greg.llt().solve(Mat::Identity(G.rows(), G.cols()));
    double loo = 0.0;
    for (int i = 0; i < Ginv.rows(); ++i) {
      double gii = Ginv(i, i);
      if (gii > 0.0) loo += std::max(0.0, 1.0 / gii - delta);
    }
    sk.err_est = loo / static_cast<double>(Ginv.rows());
    if (sk.err_est <= 0.01 * std::abs(sk.trace)) break;
    target = std::min(2 * target, dim);
  }
  return sk;
}

}  // namespace coed::lowrank
