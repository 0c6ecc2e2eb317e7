#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "coed/fem.hpp"
#include "coed/mesh.hpp"

using namespace coed;
using namespace coed::fem;

namespace {

Eigen::Vector2d rotation(double x, double y) { return {0.5 - y, x - 0.5}; }

FEOperators default_ops(const Mesh& mesh, double gamma_a = 0.0) {
  return assemble_operators(mesh, 0.05, rotation, -1.0, gamma_a);
}

}  // namespace

TEST_CASE("mesh counts and boundary tags") {
  Mesh m2 = build_mesh(2);
  CHECK(m2.num_nodes() == 9);
  CHECK(m2.num_tris() == 8);
  CHECK(m2.boundary.size() == 8);
  int robin = 0;
  for (const auto& e : m2.boundary) {
    if (e.tag == EdgeTag::Robin) {
      ++robin;
      CHECK(m2.nodes(e.a, 0) == doctest::Approx(1.0));
      CHECK(m2.nodes(e.b, 0) == doctest::Approx(1.0));
    }
  }
  CHECK(robin == 2);

  Mesh m10 = build_mesh(10);
  CHECK(m10.num_nodes() == 121);
  CHECK(m10.num_tris() == 200);
  CHECK(m10.boundary.size() == 40);

  CHECK_THROWS_AS(build_mesh(1), std::invalid_argument);
}

TEST_CASE("triangles are counterclockwise") {
  Mesh mesh = build_mesh(3);
  for (int t = 0; t < mesh.num_tris(); ++t) {
    double x0 = mesh.nodes(mesh.tris(t, 0), 0), y0 = mesh.nodes(mesh.tris(t, 0), 1);
    double x1 = mesh.nodes(mesh.tris(t, 1), 0), y1 = mesh.nodes(mesh.tris(t, 1), 1);
    double x2 = mesh.nodes(mesh.tris(t, 2), 0), y2 = mesh.nodes(mesh.tris(t, 2), 1);
    double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    CHECK(det > 0.0);
  }
}

TEST_CASE("stiffness matches hand-assembled 3x3-grid oracle") {
  // Node ids j*3+i on the 3x3 grid; values derived per element by hand.
  Mat exact(9, 9);
  exact << 1, -0.5, 0, -0.5, 0, 0, 0, 0, 0,
      -0.5, 2, -0.5, 0, -1, 0, 0, 0, 0,
      0, -0.5, 1, 0, 0, -0.5, 0, 0, 0,
      -0.5, 0, 0, 2, -1, 0, -0.5, 0, 0,
      0, -1, 0, -1, 4, -1, 0, -1, 0,
      0, 0, -0.5, 0, -1, 2, 0, 0, -0.5,
      0, 0, 0, -0.5, 0, 0, 1, -0.5, 0,
      0, 0, 0, 0, -1, 0, -0.5, 2, -0.5,
      0, 0, 0, 0, 0, -0.5, 0, -0.5, 1;

  Mesh mesh = build_mesh(2);
  FEOperators ops = default_ops(mesh);
  Mat K = Mat(ops.K);
  CHECK((K - exact).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stiffness annihilates constants") {
  Mesh mesh = build_mesh(7);
  FEOperators ops = default_ops(mesh);
  Vec ones = Vec::Ones(mesh.num_nodes());
  CHECK((ops.K * ones).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("mass integrates to the domain area at every refinement") {
  for (int n : {2, 5, 10, 20, 30}) {
    Mesh mesh = build_mesh(n);
    FEOperators ops = default_ops(mesh);
    Vec ones = Vec::Ones(mesh.num_nodes());
    CHECK(ones.dot(ops.M * ones) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mass inner product integrates linears exactly") {
  Mesh mesh = build_mesh(6);
  FEOperators ops = default_ops(mesh);
  Vec x = mesh.nodes.col(0);
  Vec ones = Vec::Ones(mesh.num_nodes());
  CHECK(ones.dot(ops.M * x) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(x.dot(ops.M * x) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("advection row sums vanish and constant-velocity action is exact") {
  Mesh mesh = build_mesh(9);
  FEOperators rot = default_ops(mesh);
  Vec ones = Vec::Ones(mesh.num_nodes());
  CHECK((rot.N_adv * ones).cwiseAbs().maxCoeff() < 1e-14);

  // For v=(1,0) and u=x: N*u must equal the exact vector of integrals of
  // each basis function (centroid rule is exact here), i.e. M*1.
  FEOperators unif = assemble_operators(
      mesh, 0.05, [](double, double) { return Eigen::Vector2d{1.0, 0.0}; }, -1.0, 0.0);
  Vec lhs = unif.N_adv * Vec(mesh.nodes.col(0));
  Vec rhs = unif.M * ones;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("total advection flux matches the boundary quadrature oracle") {
  Mesh mesh = build_mesh(8);
  FEOperators ops = default_ops(mesh);
  Vec ones = Vec::Ones(mesh.num_nodes());
  double total = ones.dot(ops.N_adv * ones);

  // Oracle: closed boundary integral of v . n_out by 2-point Gauss per edge.
  double flux = 0.0;
  const double gp = 0.5 / std::sqrt(3.0);
  for (const auto& e : mesh.boundary) {
    Eigen::Vector2d a = mesh.nodes.row(e.a), b = mesh.nodes.row(e.b);
    Eigen::Vector2d mid = 0.5 * (a + b), d = b - a;
    double len = d.norm();
    Eigen::Vector2d tangent = d / len;
    Eigen::Vector2d normal(tangent.y(), -tangent.x());
    // Orient outward for the unit square.
    Eigen::Vector2d center(0.5, 0.5);
    if (normal.dot(mid - center) < 0) normal = -normal;
    for (double s : {-gp, gp}) {
      Eigen::Vector2d p = mid + s * d;
      flux += 0.5 * len * rotation(p.x(), p.y()).dot(normal);
    }
  }
  CHECK(std::abs(total - flux) < 1e-12);
  CHECK(std::abs(flux) < 1e-12);  // divergence-free rotation has zero net flux
}

TEST_CASE("robin boundary mass lives on the right edge and integrates its length") {
  Mesh mesh = build_mesh(5);
  FEOperators ops = default_ops(mesh);
  Vec ones = Vec::Ones(mesh.num_nodes());
  CHECK(ones.dot(ops.R * ones) == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 0; k < ops.R.outerSize(); ++k) {
    for (SpMat::InnerIterator it(ops.R, k); it; ++it) {
      if (it.value() == 0.0) continue;
      CHECK(mesh.nodes(it.row(), 0) == doctest::Approx(1.0));
      CHECK(mesh.nodes(it.col(), 0) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("ambient load scales as -kappa*gamma_h*gamma_a") {
  Mesh mesh = build_mesh(4);
  FEOperators zero = default_ops(mesh, 0.0);
  CHECK(zero.g.cwiseAbs().maxCoeff() == 0.0);

  FEOperators warm = assemble_operators(mesh, 0.05, rotation, -1.0, 2.0);
  Vec expect = 0.1 * (warm.R * Vec::Ones(mesh.num_nodes()));
  CHECK((warm.g - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("assembly input validation") {
  Mesh mesh = build_mesh(3);
  CHECK_THROWS_AS(assemble_operators(mesh, 0.0, rotation, -1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(assemble_operators(mesh, -1.0, rotation, -1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(assemble_operators(mesh, 0.05, rotation, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(assemble_operators(mesh, 0.05, rotation, 0.5, 0.0), ConfigError);
}

TEST_CASE("temporal grid") {
  auto grid = assemble_temporal(1.0, 20);
  CHECK(grid.dt == doctest::Approx(0.05));
  CHECK(grid.weights.size() == 20);
  CHECK(grid.weights.sum() == doctest::Approx(1.0));
  Vec a = Vec::Ones(20), b = Vec::Constant(20, 3.0);
  CHECK(grid.weighted_dot(a, b) == doctest::Approx(3.0));

  CHECK_THROWS_AS(assemble_temporal(1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(assemble_temporal(0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(assemble_temporal(-2.0, 5), std::invalid_argument);
}

TEST_CASE("node lookup helpers") {
  Mesh mesh = build_mesh(10);
  CHECK(nearest_node(mesh, 0.3, 0.7) == mesh.node_index(3, 7));
  CHECK(nearest_node(mesh, 0.31, 0.69) == mesh.node_index(3, 7));

  Mesh m30 = build_mesh(30);
  Vec chi = box_indicator(m30, 0.25, 0.25, 0.45, 0.45);
  CHECK(chi.sum() == doctest::Approx(36.0));  // grid points 8..13 in each axis
  Vec chi10 = box_indicator(build_mesh(10), 0.25, 0.25, 0.45, 0.45);
  CHECK(chi10.sum() == doctest::Approx(4.0));
}
