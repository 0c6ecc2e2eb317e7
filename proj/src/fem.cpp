#include "coed/fem.hpp"

#include <cmath>
#include <vector>

namespace coed::fem {

FEOperators assemble_operators(const Mesh& mesh, double kappa, const VelocityFn& velocity,
                               double gamma_h, double gamma_a) {
  if (!(kappa > 0.0)) throw std::invalid_argument("assemble_operators: kappa must be positive");
  if (!(gamma_h < 0.0)) {
    throw ConfigError("assemble_operators: gamma_h must be negative (outward heat exchange); "
                      "the steady operator is singular otherwise");
  }
  if (!velocity) throw std::invalid_argument("assemble_operators: velocity field not set");

  int nn = mesh.num_nodes();
  std::vector<Triplet> tm, tk, tn, tr;
  tm.reserve(9 * mesh.num_tris());
  tk.reserve(9 * mesh.num_tris());
  tn.reserve(9 * mesh.num_tris());

  for (int t = 0; t < mesh.num_tris(); ++t) {
    int v[3] = {mesh.tris(t, 0), mesh.tris(t, 1), mesh.tris(t, 2)};
    double x[3], y[3];
    for (int a = 0; a < 3; ++a) {
      x[a] = mesh.nodes(v[a], 0);
      y[a] = mesh.nodes(v[a], 1);
    }
    double det = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
    double area = 0.5 * det;
    if (!(area > 0.0)) throw NumericalError("assemble_operators: degenerate or flipped triangle");

    // Constant P1 gradients: grad phi_a = (b_a, c_a) / (2 area).
    double b[3], c[3];
    for (int a = 0; a < 3; ++a) {
      int a1 = (a + 1) % 3, a2 = (a + 2) % 3;
      b[a] = y[a1] - y[a2];
      c[a] = x[a2] - x[a1];
    }
    double cx = (x[0] + x[1] + x[2]) / 3.0;
    double cy = (y[0] + y[1] + y[2]) / 3.0;
    Eigen::Vector2d vc = velocity(cx, cy);

    for (int a = 0; a < 3; ++a) {
      for (int bcol = 0; bcol < 3; ++bcol) {
        double ke = (b[a] * b[bcol] + c[a] * c[bcol]) / (4.0 * area);
        double me = (a == bcol ? area / 6.0 : area / 12.0);
        // One-point quadrature: int phi_a = area/3, velocity at centroid.
        double ne = (vc.x() * b[bcol] + vc.y() * c[bcol]) / 6.0;
        tk.emplace_back(v[a], v[bcol], ke);
        tm.emplace_back(v[a], v[bcol], me);
        tn.emplace_back(v[a], v[bcol], ne);
      }
    }
  }

  for (const auto& e : mesh.boundary) {
    if (e.tag != EdgeTag::Robin) continue;
    double dx = mesh.nodes(e.a, 0) - mesh.nodes(e.b, 0);
    double dy = mesh.nodes(e.a, 1) - mesh.nodes(e.b, 1);
    double len = std::sqrt(dx * dx + dy * dy);
    tr.emplace_back(e.a, e.a, len / 3.0);
    tr.emplace_back(e.b, e.b, len / 3.0);
    tr.emplace_back(e.a, e.b, len / 6.0);
    tr.emplace_back(e.b, e.a, len / 6.0);
  }

  FEOperators ops;
  ops.kappa = kappa;
  ops.gamma_h = gamma_h;
  ops.gamma_a = gamma_a;
  ops.M.resize(nn, nn);
  ops.K.resize(nn, nn);
  ops.N_adv.resize(nn, nn);
  ops.R.resize(nn, nn);
  ops.M.setFromTriplets(tm.begin(), tm.end());
  ops.K.setFromTriplets(tk.begin(), tk.end());
  ops.N_adv.setFromTriplets(tn.begin(), tn.end());
  ops.R.setFromTriplets(tr.begin(), tr.end());
  ops.M.makeCompressed();
  ops.K.makeCompressed();
  ops.N_adv.makeCompressed();
  ops.R.makeCompressed();
  ops.g = -kappa * gamma_h * gamma_a * (ops.R * Vec::Ones(nn));
  return ops;
}

TemporalGrid assemble_temporal(double T, int nt) {
  if (nt < 1) throw std::invalid_argument("assemble_temporal: nt must be >= 1");
  if (!(T > 0.0)) throw std::invalid_argument("assemble_temporal: T must be positive");
  TemporalGrid grid;
  grid.T = T;
  grid.nt = nt;
  grid.dt = T / nt;
  grid.weights = Vec::Constant(nt, grid.dt);
  return grid;
}

}  // namespace coed::fem
