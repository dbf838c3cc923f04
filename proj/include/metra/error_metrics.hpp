#pragma once

#include <functional>
#include <vector>

#include "metra/linalg.hpp"
#include "metra/mesh.hpp"

namespace metra {

using ScalarFunction = std::function<double(const Vec&)>;

// Test functions with a sharp transition of width ~1/gamma.
//   Arctan2D: u = atan(gamma (10 y + cos 2 pi x))
//   Arctan3D: u = atan(gamma (10 z + cos 2 pi x cos 2 pi y))
struct AnalyticFunction {
  enum class Kind { Arctan2D, Arctan3D };
  Kind kind = Kind::Arctan2D;
  double gamma = 1.0;

  // Throws ConfigError unless gamma > 0.
  static AnalyticFunction arctan2d(double gamma);
  static AnalyticFunction arctan3d(double gamma);
  int dim() const { return kind == Kind::Arctan2D ? 2 : 3; }
  double operator()(const Vec& x) const;
};

// Warp & blend interpolation points on the master simplex (equispaced for p <= 2).
std::vector<Vec> warp_blend_nodes(int dim, int degree);

// Coefficients of the interpolant of u in the isoparametric Lagrange space of
// the mesh (one value per mesh node). Nodal values are taken at the physical
// images of the warp & blend points.
std::vector<double> interpolate(const HighOrderMesh& mesh, const ScalarFunction& u);

struct ErrorResult {
  double global = 0.0;
  std::vector<double> per_element;  // global^2 = sum of squares
};

// || u - uh ||_L2 for a given nodal coefficient vector; n_1d = 0 selects 3p + 2.
ErrorResult l2_error(const HighOrderMesh& mesh, const ScalarFunction& u,
                     const std::vector<double>& coefficients, int n_1d = 0);

// e_I = || u - Pi u ||.
ErrorResult interpolation_error(const HighOrderMesh& mesh, const ScalarFunction& u, int n_1d = 0);

// Best L2 approximation in the finite element space (mass matrix solve by CG).
std::vector<double> l2_projection(const HighOrderMesh& mesh, const ScalarFunction& u, int n_1d = 0);

// e_A = min_v || u - v ||.
ErrorResult approximation_error(const HighOrderMesh& mesh, const ScalarFunction& u, int n_1d = 0);

}  // namespace metra
