#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace coed {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Bad user-facing configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver breakdown, non-convergence, degenerate data (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace coed
