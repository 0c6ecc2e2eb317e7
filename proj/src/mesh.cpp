#include "coed/mesh.hpp"

#include <cmath>
#include <limits>

namespace coed::fem {

Mesh build_mesh(int n) {
  if (n < 2) throw std::invalid_argument("build_mesh: n must be >= 2");
  Mesh mesh;
  mesh.n = n;
  int nn = (n + 1) * (n + 1);
  mesh.nodes.resize(nn, 2);
  double h = 1.0 / n;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      int id = mesh.node_index(i, j);
      mesh.nodes(id, 0) = i * h;
      mesh.nodes(id, 1) = j * h;
    }
  }
  mesh.tris.resize(2 * n * n, 3);
  int t = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      int v00 = mesh.node_index(i, j);
      int v10 = mesh.node_index(i + 1, j);
      int v01 = mesh.node_index(i, j + 1);
      int v11 = mesh.node_index(i + 1, j + 1);
      mesh.tris.row(t++) << v00, v10, v11;
      mesh.tris.row(t++) << v00, v11, v01;
    }
  }
  mesh.boundary.reserve(4 * n);
  for (int i = 0; i < n; ++i) {
    mesh.boundary.push_back({mesh.node_index(i, 0), mesh.node_index(i + 1, 0), EdgeTag::Neumann});
    mesh.boundary.push_back({mesh.node_index(i, n), mesh.node_index(i + 1, n), EdgeTag::Neumann});
    mesh.boundary.push_back({mesh.node_index(0, i), mesh.node_index(0, i + 1), EdgeTag::Neumann});
    mesh.boundary.push_back({mesh.node_index(n, i), mesh.node_index(n, i + 1), EdgeTag::Robin});
  }
  return mesh;
}

int nearest_node(const Mesh& mesh, double x, double y) {
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    double dx = mesh.nodes(i, 0) - x;
    double dy = mesh.nodes(i, 1) - y;
    double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Vec box_indicator(const Mesh& mesh, double x0, double y0, double x1, double y1) {
  if (!(x0 <= x1 && y0 <= y1)) throw std::invalid_argument("box_indicator: empty box");
  const double tol = 1e-12;
  Vec chi = Vec::Zero(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    double x = mesh.nodes(i, 0), y = mesh.nodes(i, 1);
    if (x >= x0 - tol && x <= x1 + tol && y >= y0 - tol && y <= y1 + tol) chi[i] = 1.0;
  }
  return chi;
}

}  // namespace coed::fem
