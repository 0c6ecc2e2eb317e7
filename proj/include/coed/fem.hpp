#pragma once

#include <functional>

#include "coed/mesh.hpp"
#include "coed/types.hpp"

namespace coed::fem {

using VelocityFn = std::function<Eigen::Vector2d(double, double)>;

// Piecewise-linear FE operators on the mesh. K and N_adv are unscaled
// (diffusivity enters downstream); R is the boundary mass on Robin edges;
// g is the load induced by the ambient value gamma_a:
//   g = -kappa * gamma_h * gamma_a * (R * 1).
struct FEOperators {
  SpMat M;      // consistent mass
  SpMat K;      // stiffness
  SpMat N_adv;  // advection, centroid quadrature for the velocity
  SpMat R;      // Robin boundary mass
  Vec g;        // ambient boundary load
  double kappa = 0.0;
  double gamma_h = 0.0;
  double gamma_a = 0.0;
};

FEOperators assemble_operators(const Mesh& mesh, double kappa, const VelocityFn& velocity,
                               double gamma_h, double gamma_a);

// Uniform time grid on [0, T] with composite-midpoint quadrature weights
// (all equal to dt) for the control trajectory.
struct TemporalGrid {
  double T = 0.0;
  int nt = 0;
  double dt = 0.0;
  Vec weights;

  double weighted_dot(const Vec& a, const Vec& b) const {
    return (a.array() * weights.array() * b.array()).sum();
  }
};

TemporalGrid assemble_temporal(double T, int nt);

}  // namespace coed::fem
