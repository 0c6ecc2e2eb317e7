#include "coed/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <atomic>
#include <cmath>
#include <string>
#include <vector>

namespace coed::linalg {

namespace {
std::atomic<uint64_t> g_solve_count{0};
}

uint64_t solve_count() { return g_solve_count.load(std::memory_order_relaxed); }
void bump_solve_count(uint64_t n) { g_solve_count.fetch_add(n, std::memory_order_relaxed); }

CholeskySolver::CholeskySolver(const SpMat& A, const char* label) {
  llt_ = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
  llt_->compute(A);
  if (llt_->info() != Eigen::Success) {
    throw NumericalError(std::string("Cholesky factorization failed: ") + label);
  }
}

Vec CholeskySolver::solve(const Vec& b) const {
  bump_solve_count();
  return llt_->solve(b);
}

Vec CholeskySolver::whiten(const Vec& xi) const {
  bump_solve_count();
  // A = P^T L L^T P  =>  w = P^T L^{-T} xi has covariance A^{-1}.
  return llt_->permutationPinv() * llt_->matrixU().solve(xi).eval();
}

LuSolver::LuSolver(const SpMat& A, const char* label) {
  lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
  lu_->compute(A);
  if (lu_->info() != Eigen::Success) {
    throw NumericalError(std::string("LU factorization failed: ") + label);
  }
}

Vec LuSolver::solve(const Vec& b) const {
  bump_solve_count();
  return lu_->solve(b);
}

Vec LuSolver::solve_transpose(const Vec& b) const {
  bump_solve_count();
  return lu_->adjoint().solve(b);
}

double weighted_dot(const Vec& a, const Vec& b, const SpMat* metric) {
  if (metric == nullptr) return a.dot(b);
  return a.dot(*metric * b);
}

double weighted_norm(const Vec& a, const SpMat* metric) {
  return std::sqrt(std::max(0.0, weighted_dot(a, a, metric)));
}

Vec conjugate_gradient(const ApplyFn& apply, const Vec& rhs, const SpMat* metric,
                       const CgOptions& opts, CgReport* report) {
  Vec x = Vec::Zero(rhs.size());
  Vec r = rhs;
  double rhs_norm = weighted_norm(rhs, metric);
  CgReport rep;
  if (rhs_norm == 0.0) {
    rep.converged = true;
    if (report) *report = rep;
    return x;
  }
  std::vector<Vec> basis;  // metric-orthonormal residual directions
  auto reorth = [&](Vec& v) {
    if (basis.empty()) return;
    // Classical Gram-Schmidt, two passes: coefficients against the basis are
    // taken from the vector at the start of each pass.
    for (int pass = 0; pass < 2; ++pass) {
      Vec mv = metric ? Vec(*metric * v) : v;
      Vec corr = Vec::Zero(v.size());
      for (const Vec& q : basis) corr += q.dot(mv) * q;
      v -= corr;
    }
  };
  Vec p = r;
  double rs = weighted_dot(r, r, metric);
  if (opts.reorthogonalize && rs > 0.0) basis.push_back(r / std::sqrt(rs));
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    double rel = std::sqrt(std::max(0.0, rs)) / rhs_norm;
    rep.rel_residual = rel;
    if (rel <= opts.rel_tol) {
      rep.converged = true;
      break;
    }
    Vec Ap = apply(p);
    double pAp = weighted_dot(p, Ap, metric);
    if (!(pAp > 0.0)) {
      throw NumericalError("CG breakdown: operator not positive definite (iteration " +
                           std::to_string(iter) + ")");
    }
    double alpha = rs / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    if (opts.reorthogonalize) reorth(r);
    double rs_next = weighted_dot(r, r, metric);
    p = r + (rs_next / rs) * p;
    rs = rs_next;
    if (opts.reorthogonalize && rs > 0.0) basis.push_back(r / std::sqrt(rs));
  }
  rep.iterations = iter;
  if (report) {
    *report = rep;
  } else if (!rep.converged) {
    throw NumericalError("CG did not converge in " + std::to_string(opts.max_iter) +
                         " iterations (relative residual " + std::to_string(rep.rel_residual) + ")");
  }
  return x;
}

Mat orthonormalize(const Mat& Y, const SpMat* metric) {
  // Euclidean QR first: sketches arrive with condition numbers far beyond
  // what CholQR tolerates, and a Householder basis caps the metric Gram's
  // conditioning at that of the metric itself. Rank-deficient input yields
  // harmless extra directions from the orthogonal complement.
  Eigen::HouseholderQR<Mat> qr(Y);
  Mat Q = qr.householderQ() * Mat::Identity(Y.rows(), Y.cols());
  for (int pass = 0; pass < 2; ++pass) {
    Mat G;
    if (metric) {
      G = Q.transpose() * (*metric * Q);
    } else {
      G = Q.transpose() * Q;
    }
    Eigen::LLT<Mat> llt(G);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("orthonormalize: rank-deficient block");
    }
    Mat U = llt.matrixU();
    Q = U.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(Q);
  }
  return Q;
}

}  // namespace coed::linalg
