#pragma once

#include <functional>
#include <memory>

#include "coed/types.hpp"

namespace coed::linalg {

// Global count of triangular backsolves against factored operators. Lets
// tests assert that a code path performs zero solves (e.g. the greedy design
// scan after the offline stage).
uint64_t solve_count();
void bump_solve_count(uint64_t n = 1);

// Sparse Cholesky with solve counting. Copyable (shared factorization).
class CholeskySolver {
 public:
  CholeskySolver() = default;
  explicit CholeskySolver(const SpMat& A, const char* label = "spd");

  Vec solve(const Vec& b) const;

  // Given iid standard normal xi, returns w with covariance A^{-1}
  // (white noise for the inner product induced by A).
  Vec whiten(const Vec& xi) const;

  bool valid() const { return static_cast<bool>(llt_); }

 private:
  std::shared_ptr<Eigen::SimplicialLLT<SpMat>> llt_;
};

// Sparse LU with counted solves for the operator and its transpose.
class LuSolver {
 public:
  LuSolver() = default;
  explicit LuSolver(const SpMat& A, const char* label = "lu");

  Vec solve(const Vec& b) const;
  Vec solve_transpose(const Vec& b) const;

  bool valid() const { return static_cast<bool>(lu_); }

 private:
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
};

using ApplyFn = std::function<Vec(const Vec&)>;

// Inner product, Euclidean when metric == nullptr.
double weighted_dot(const Vec& a, const Vec& b, const SpMat* metric);
double weighted_norm(const Vec& a, const SpMat* metric);

struct CgOptions {
  double rel_tol = 1e-10;
  int max_iter = 500;
  // Keep all residual directions metric-orthogonal. Required when the
  // operator is a low-rank update of the identity with a huge spread
  // (data-misfit Hessians): plain CG loses the finite-termination property
  // to roundoff and stalls.
  bool reorthogonalize = false;
};

struct CgReport {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

// CG for an operator that is self-adjoint positive definite with respect to
// the metric inner product. Throws NumericalError on non-convergence unless
// a report pointer is supplied.
Vec conjugate_gradient(const ApplyFn& apply, const Vec& rhs, const SpMat* metric,
                       const CgOptions& opts = {}, CgReport* report = nullptr);

// Orthonormalizes the columns of Y in the metric inner product
// (Cholesky-QR, two passes). Throws NumericalError on rank deficiency.
Mat orthonormalize(const Mat& Y, const SpMat* metric);

}  // namespace coed::linalg
