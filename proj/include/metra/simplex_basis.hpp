#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "metra/linalg.hpp"

namespace metra {

inline constexpr int kMaxDegree = 4;

// Barycentric lattice index (b0, ..., bk) of a node on the degree-p simplex,
// with sum b = p. Unused trailing entries are zero.
using LatticeIndex = std::array<int, 4>;

std::size_t simplex_node_count(int dim, int degree);

// Lattice of the degree-m simplex in canonical node order:
//   1. vertices 0..k
//   2. nodes interior to edges, edge by edge in lexicographic vertex-pair order
//      (01, 02, ..., 12, ...), each edge ordered from its first vertex
//   3. face interiors, then the cell interior, same rule
// Within one sub-simplex, nodes are sorted by descending barycentric tuple.
// Coordinates are xi_j = b_j / m for j = 1..k.
std::vector<LatticeIndex> simplex_lattice(int dim, int m);

// Lattice coordinates for any m >= 1 (used for sampling, not geometry).
std::vector<Vec> lattice_points(int dim, int m);

// Equispaced nodes of the degree-p master simplex; dim in {1,2,3}, p in 1..4.
std::vector<Vec> master_nodes(int dim, int degree);

// Vertex combinations of the master simplex spanning all k-dim sub-simplices,
// in lexicographic order.
std::vector<std::vector<int>> local_subsimplices(int dim, int k);

struct MasterSimplex {
  int dim = 0;
  int degree = 0;
  std::vector<LatticeIndex> lattice;
  std::vector<Vec> nodes;

  static MasterSimplex make(int dim, int degree);
  std::size_t size() const { return nodes.size(); }
  // Position of a lattice index in the canonical order, or -1.
  int index_of(const LatticeIndex& b) const;
};

// Nodal Lagrange basis of total degree p over arbitrary unisolvent nodes.
class LagrangeBasis {
 public:
  LagrangeBasis(int dim, int degree, std::vector<Vec> nodes);

  static LagrangeBasis equispaced(int dim, int degree);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Vec>& nodes() const { return nodes_; }

  Eigen::VectorXd values(const Vec& xi) const;
  // Row i holds grad N_i(xi).
  Eigen::MatrixXd gradients(const Vec& xi) const;

 private:
  int dim_;
  int degree_;
  std::vector<Vec> nodes_;
  std::vector<std::array<int, 3>> exponents_;
  Eigen::MatrixXd coefficients_;  // monomial j, basis function i -> (j, i)
};

// Affine frame of the unit-edge regular simplex: columns are the edge vectors
// from vertex 0 to vertices 1..k.
struct EquilateralFrame {
  int dim = 0;
  Mat jacobian;
  Mat inverse;
  double det = 0.0;
};

EquilateralFrame equilateral_jacobian(int dim);

struct QuadratureRule {
  int dim = 0;
  int exactness = 0;  // polynomials of this total degree are integrated exactly
  std::vector<Vec> points;
  std::vector<double> weights;  // sum to the master-simplex volume
};

// Collapsed tensor-product Gauss-Legendre rule with n_1d^dim points.
QuadratureRule quadrature(int dim, int n_1d);

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

double master_volume(int dim);

// D phi(xi) = sum_i x_i (grad N_i)^T with coords stored column-wise (d x n).
Mat map_jacobian(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& grads);
Mat map_jacobian(const Eigen::MatrixXd& coords, const LagrangeBasis& basis, const Vec& xi);

// Basis values and gradients frozen at a set of master points.
struct Tabulation {
  std::vector<Vec> points;
  std::vector<double> weights;
  Eigen::MatrixXd values;                 // point q, basis i
  std::vector<Eigen::MatrixXd> gradients;  // per point: basis i x dim

  static Tabulation make(const LagrangeBasis& basis, const QuadratureRule& rule);
  static Tabulation make(const LagrangeBasis& basis, const std::vector<Vec>& points);
  std::size_t size() const { return points.size(); }
};

}  // namespace metra
