#pragma once

#include "coed/fem.hpp"
#include "coed/linalg.hpp"
#include "coed/types.hpp"

namespace coed::model {

// Steady advection-free diffusion with the exchange boundary:
//   (kappa K - kappa gamma_h R) u = M m + g.
// The solution map is affine: u = S m + offset, with S self-adjoint in the
// mass inner product.
struct SteadyModel {
  SpMat A_st;
  SpMat M;
  Vec g;
  Vec offset;  // A_st^{-1} g
  linalg::CholeskySolver solver;

  Vec solve(const Vec& m) const;    // S m + offset
  Vec apply_S(const Vec& m) const;  // linear part
  int dim() const { return static_cast<int>(A_st.rows()); }
};

SteadyModel build_steady(const fem::FEOperators& ops);

// Backward-Euler transient model
//   A_impl u^{k+1} = M u^k + dt (M m + M chi_c z_k + g),
// with A_impl = M + dt (kappa K + N_adv - kappa gamma_h R) factored once.
struct TransientModel {
  fem::TemporalGrid grid;
  SpMat M;
  SpMat A_impl;
  Vec chi_c;
  Vec g;
  linalg::LuSolver solver;

  // Terminal state after nt steps. z may be empty (interpreted as zero
  // control); scale_g turns the ambient load off for linear-part solves.
  Vec terminal(const Vec& u0, const Vec& m, const Vec& z, double scale_g = 1.0) const;

  // Full trajectory, one row per time level (nt+1 rows).
  Mat trajectory(const Vec& u0, const Vec& m, const Vec& z) const;

  int dim() const { return static_cast<int>(M.rows()); }
};

TransientModel build_transient(const fem::FEOperators& ops, const fem::TemporalGrid& grid,
                               const Vec& chi_c);

// Terminal affine map u_T(m, z) = A m + B z + q. The parameter enters twice:
// as the volume source and through the steady initial condition u0 = S m + s.
// Adjoints are discrete (reverse time stepping) and weighted: A* = M^{-1} A^T M
// on the state/parameter spaces, B* = Mt^{-1} B^T M on the control space.
struct TerminalMap {
  SteadyModel steady;
  TransientModel transient;
  Vec q;

  Vec apply_A(const Vec& m) const;
  Vec apply_At(const Vec& u) const;
  Vec apply_B(const Vec& z) const;
  Vec apply_Bt(const Vec& u) const;
  Vec apply(const Vec& m, const Vec& z) const;  // A m + B z + q in one sweep

  int state_dim() const { return transient.dim(); }
  int control_dim() const { return transient.grid.nt; }
};

TerminalMap build_terminal_map(const SteadyModel& steady, const TransientModel& transient);

}  // namespace coed::model
