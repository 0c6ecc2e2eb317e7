#pragma once

#include <vector>

#include "coed/types.hpp"

namespace coed::fem {

// Boundary tags for the unit square: everything is zero-flux except the
// right edge (x = 1), which carries the heat-exchange (Robin) condition.
enum class EdgeTag { Neumann = 0, Robin = 1 };

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  EdgeTag tag = EdgeTag::Neumann;
};

// Structured triangulation of the unit square: (n+1)^2 nodes, 2 n^2
// right triangles (cells split along the (0,0)-(1,1) diagonal), CCW.
struct Mesh {
  int n = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 2> nodes;  // row i: (x, y)
  Eigen::Matrix<int, Eigen::Dynamic, 3> tris;
  std::vector<BoundaryEdge> boundary;

  int num_nodes() const { return static_cast<int>(nodes.rows()); }
  int num_tris() const { return static_cast<int>(tris.rows()); }
  int node_index(int i, int j) const { return j * (n + 1) + i; }
};

Mesh build_mesh(int n);

// Index of the mesh node closest to (x, y).
int nearest_node(const Mesh& mesh, double x, double y);

// Indicator vector of nodes inside the closed axis-aligned box.
Vec box_indicator(const Mesh& mesh, double x0, double y0, double x1, double y1);

}  // namespace coed::fem
