#include "coed/bayes.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace coed::bayes {

Vec Prior::apply_sqrt(const Vec& v) const {
  if (v.size() != dim()) throw std::invalid_argument("Prior::apply_sqrt: bad size");
  return L_solver.solve(M * v);
}

Vec Prior::apply_cov(const Vec& v) const { return apply_sqrt(apply_sqrt(v)); }

Vec Prior::apply_cov_inv(const Vec& v) const {
  if (v.size() != dim()) throw std::invalid_argument("Prior::apply_cov_inv: bad size");
  return M_solver.solve(L * M_solver.solve(L * v));
}

Vec Prior::white(rng::Stream& s) const {
  Vec xi = rng::normal_vector(s, dim());
  return M_solver.whiten(xi);
}

Vec Prior::sample(rng::Stream& s) const { return mean + apply_sqrt(white(s)); }

Prior build_prior(const fem::FEOperators& ops, double alpha, double beta, const Vec& mean) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw ConfigError("build_prior: alpha and beta must be positive");
  }
  Prior p;
  p.M = ops.M;
  p.L = alpha * ops.K + beta * ops.M;
  p.L.makeCompressed();
  p.alpha = alpha;
  p.beta = beta;
  p.mean = mean.size() == 0 ? Vec::Zero(ops.M.rows()) : mean;
  if (p.mean.size() != ops.M.rows()) throw std::invalid_argument("build_prior: bad mean size");
  p.L_solver = linalg::CholeskySolver(p.L, "prior");
  p.M_solver = linalg::CholeskySolver(p.M, "mass");
  return p;
}

Vec ObservationOperator::select(const Vec& u) const {
  Vec y(count());
  for (int i = 0; i < count(); ++i) y[i] = u[nodes[i]];
  return y;
}

Vec ObservationOperator::scatter(const Vec& y, int dim) const {
  if (y.size() != count()) throw std::invalid_argument("scatter: bad data size");
  Vec u = Vec::Zero(dim);
  for (int i = 0; i < count(); ++i) u[nodes[i]] += y[i];
  return u;
}

ObservationOperator build_observations(const fem::Mesh& mesh, const model::SteadyModel& steady,
                                       int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("build_observations: empty sensor grid");
  ObservationOperator obs;
  int n_s = rows * cols;
  obs.coords.resize(n_s, 2);
  obs.nodes.resize(n_s);
  int k = 0;
  for (int j = 1; j <= rows; ++j) {
    for (int i = 1; i <= cols; ++i) {
      double x = static_cast<double>(i) / (cols + 1);
      double y = static_cast<double>(j) / (rows + 1);
      int node = fem::nearest_node(mesh, x, y);
      obs.coords(k, 0) = mesh.nodes(node, 0);
      obs.coords(k, 1) = mesh.nodes(node, 1);
      obs.nodes[k] = node;
      ++k;
    }
  }
  obs.b = obs.select(steady.offset);
  return obs;
}

int Design::active() const { return static_cast<int>(w.sum() + 0.5); }

void Design::validate(int n_s) const {
  if (w.size() != n_s) throw std::invalid_argument("Design: weight size mismatch");
  for (int i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0 && w[i] != 1.0) throw std::invalid_argument("Design: weights must be 0 or 1");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("Design: sigma must be positive");
}

Design Design::all_on(int n_s, double sigma) { return Design{Vec::Ones(n_s), sigma}; }

Design Design::from_indices(int n_s, const std::vector<int>& idx, double sigma) {
  Design d{Vec::Zero(n_s), sigma};
  for (int i : idx) {
    if (i < 0 || i >= n_s) throw std::invalid_argument("Design: sensor index out of range");
    d.w[i] = 1.0;
  }
  return d;
}

Vec InverseProblem::apply_F(const Vec& m) const { return obs.select(steady.apply_S(m)); }

Vec InverseProblem::apply_Ft(const Vec& y) const {
  return steady.solver.solve(obs.scatter(y, dim()));
}

Vec InverseProblem::misfit_apply(const Design& d, const Vec& v) const {
  Vec t = prior.apply_sqrt(v);
  Vec data = apply_F(t);
  double inv_s2 = 1.0 / (d.sigma * d.sigma);
  data.array() *= d.w.array() * inv_s2;
  return prior.apply_sqrt(apply_Ft(data));
}

SynthesisResult InverseProblem::synthesize(const Vec& m_true, double delta, rng::Stream noise) const {
  if (!(delta > 0.0)) throw ConfigError("synthesize: relative noise level must be positive");
  Vec clean = apply_F(m_true) + obs.b;
  double scale = clean.norm();
  if (scale == 0.0) {
    throw NumericalError("synthesize: degenerate data (clean observations are identically zero)");
  }
  double sigma = delta * scale / std::sqrt(static_cast<double>(obs.count()));
  Vec y = clean + sigma * rng::normal_vector(noise, obs.count());
  return {y, sigma};
}

Vec InverseProblem::compute_map(const Design& d, const Vec& y, linalg::CgReport* report) const {
  d.validate(obs.count());
  if (y.size() != obs.count()) throw std::invalid_argument("compute_map: bad data size");
  Vec resid = y - obs.b - apply_F(prior.mean);
  resid.array() *= d.w.array() / (d.sigma * d.sigma);
  Vec rhs = prior.apply_sqrt(apply_Ft(resid));
  linalg::CgOptions opts;
  opts.rel_tol = 1e-12;
  opts.max_iter = 2000;
  opts.reorthogonalize = true;
  Vec x = linalg::conjugate_gradient(
      [&](const Vec& v) -> Vec { return misfit_apply(d, v) + v; }, rhs, &prior.M, opts, report);
  return prior.mean + prior.apply_sqrt(x);
}

Vec InverseProblem::apply_postcov(const Design& d, const Vec& v) const {
  d.validate(obs.count());
  Vec rhs = prior.apply_sqrt(v);
  linalg::CgOptions opts;
  opts.rel_tol = 1e-12;
  opts.max_iter = 2000;
  opts.reorthogonalize = true;
  Vec x = linalg::conjugate_gradient(
      [&](const Vec& u) -> Vec { return misfit_apply(d, u) + u; }, rhs, &prior.M, opts);
  return prior.apply_sqrt(x);
}

GaussianBelief posterior_belief(const InverseProblem& ip, const Design& d, const Vec& y) {
  GaussianBelief belief;
  belief.mean = ip.compute_map(d, y);
  belief.kind = CovKind::PosteriorExact;
  belief.cov_apply = [ip, d](const Vec& v) { return ip.apply_postcov(d, v); };
  return belief;
}

DensePosterior dense_posterior(const InverseProblem& ip, const Design& d, const Vec& y) {
  d.validate(ip.obs.count());
  if (y.size() != ip.obs.count()) throw std::invalid_argument("dense_posterior: bad data size");
  int n = ip.dim();
  int n_s = ip.obs.count();

  // Dense F assembled row-wise through the adjoint (n_s steady solves).
  Mat F(n_s, n);
  for (int i = 0; i < n_s; ++i) {
    Vec e = Vec::Zero(n);
    e[ip.obs.nodes[i]] = 1.0;
    F.row(i) = ip.prior.M * ip.steady.solver.solve(e);
  }
  // F = obs o S with S = A_st^{-1} M: row_i = (M A_st^{-1} e_i)^T.
  Mat Minv_L(n, n);
  {
    Mat Ld = Mat(ip.prior.L);
    for (int j = 0; j < n; ++j) Minv_L.col(j) = ip.prior.M_solver.solve(Ld.col(j));
  }
  Mat H = Mat(ip.prior.L) * Minv_L;  // L M^{-1} L
  double inv_s2 = 1.0 / (d.sigma * d.sigma);
  for (int i = 0; i < n_s; ++i) {
    if (d.w[i] != 0.0) H.noalias() += inv_s2 * F.row(i).transpose() * F.row(i);
  }
  H = 0.5 * (H + H.transpose());

  DensePosterior post;
  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success) throw NumericalError("dense_posterior: indefinite Hessian");
  post.cov = llt.solve(Mat::Identity(n, n));
  post.cov = 0.5 * (post.cov + post.cov.transpose());

  Vec resid = y - ip.obs.b - ip.apply_F(ip.prior.mean);
  resid.array() *= d.w.array() * inv_s2;
  post.m_map = ip.prior.mean + post.cov * (F.transpose() * resid);

  Eigen::LLT<Mat> cov_llt(post.cov);
  if (cov_llt.info() != Eigen::Success) {
    throw NumericalError("dense_posterior: covariance factorization failed");
  }
  post.factor = cov_llt.matrixL();
  return post;
}

Mat sample_posterior_dense(const DensePosterior& post, int count, rng::Stream s) {
  if (count < 1) throw std::invalid_argument("sample_posterior_dense: count must be positive");
  int n = static_cast<int>(post.m_map.size());
  Mat out(n, count);
  for (int j = 0; j < count; ++j) {
    out.col(j) = post.m_map + post.factor * rng::normal_vector(s, n);
  }
  return out;
}

}  // namespace coed::bayes
