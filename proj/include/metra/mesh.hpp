#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "metra/linalg.hpp"

namespace metra {

enum class ConstraintKind { Free, Fixed, AxisSlide };

// Per-node boundary constraint. AxisSlide freezes a proper, non-empty subset of
// the coordinates (a node on a box face keeps the face coordinate).
struct BoundaryConstraint {
  ConstraintKind kind = ConstraintKind::Free;
  std::uint8_t frozen_mask = 0;

  static BoundaryConstraint free() { return {}; }
  static BoundaryConstraint fixed() { return {ConstraintKind::Fixed, 0}; }
  // Collapses to Free/Fixed when the mask is empty/full.
  static BoundaryConstraint from_mask(std::uint8_t mask, int dim);

  bool is_frozen(int coord) const {
    if (kind == ConstraintKind::Fixed) return true;
    if (kind == ConstraintKind::Free) return false;
    return (frozen_mask >> coord) & 1u;
  }
  bool operator==(const BoundaryConstraint&) const = default;
};

// Nodal simplicial mesh of degree p in dimension d. Element connectivity follows
// the canonical master-node order of simplex_basis.
class HighOrderMesh {
 public:
  HighOrderMesh() = default;
  HighOrderMesh(int dim, int degree, std::vector<double> coords, std::vector<int> connectivity,
                std::vector<BoundaryConstraint> constraints = {});

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  std::size_t num_nodes() const { return coords_.size() / static_cast<std::size_t>(dim_); }
  std::size_t num_elements() const { return connectivity_.size() / nodes_per_element_; }
  std::size_t nodes_per_element() const { return nodes_per_element_; }

  std::span<const int> element(std::size_t e) const {
    return {connectivity_.data() + e * nodes_per_element_, nodes_per_element_};
  }
  Vec node(std::size_t i) const;
  void set_node(std::size_t i, const Vec& x);

  // d x nodes_per_element matrix of the element's node coordinates.
  Eigen::MatrixXd element_coords(std::size_t e) const;

  const std::vector<double>& coordinates() const { return coords_; }
  std::vector<double>& coordinates() { return coords_; }
  const std::vector<int>& connectivity() const { return connectivity_; }
  const std::vector<BoundaryConstraint>& constraints() const { return constraints_; }

  std::pair<Vec, Vec> bounding_box() const;
  double bbox_diagonal() const;

 private:
  int dim_ = 0;
  int degree_ = 0;
  std::size_t nodes_per_element_ = 0;
  std::vector<double> coords_;
  std::vector<int> connectivity_;
  std::vector<BoundaryConstraint> constraints_;
};

// A k-dimensional sub-simplex of an element, resolved to global node indices in
// the canonical degree-p k-simplex layout. Vertices are sorted by global index.
struct EntityRef {
  std::size_t element = 0;
  int dim = 0;
  int local_index = 0;
  std::vector<int> nodes;
};

// Each geometric k-entity exactly once (first element that references it).
std::vector<EntityRef> sub_entities(const HighOrderMesh& mesh, int k);

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

// Box split into 2 (d=2) or 6 (d=3, Kuhn) simplices per cell, degree p,
// equispaced nodes. Boundary nodes freeze the coordinates pinned to box faces;
// corners end up Fixed.
HighOrderMesh structured_mesh(const Box& box, int dim, int degree, int n);

}  // namespace metra
