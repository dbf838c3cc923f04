#include "metra/mesh.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "metra/errors.hpp"
#include "metra/simplex_basis.hpp"

namespace metra {

BoundaryConstraint BoundaryConstraint::from_mask(std::uint8_t mask, int dim) {
  const std::uint8_t full = static_cast<std::uint8_t>((1u << dim) - 1u);
  mask &= full;
  if (mask == 0) return free();
  if (mask == full) return fixed();
  return {ConstraintKind::AxisSlide, mask};
}

HighOrderMesh::HighOrderMesh(int dim, int degree, std::vector<double> coords,
                             std::vector<int> connectivity,
                             std::vector<BoundaryConstraint> constraints)
    : dim_(dim),
      degree_(degree),
      coords_(std::move(coords)),
      connectivity_(std::move(connectivity)),
      constraints_(std::move(constraints)) {
  if (dim < 2 || dim > 3) throw ConfigError("mesh dimension must be 2 or 3");
  if (degree < 1 || degree > kMaxDegree) {
    throw ConfigError("unsupported polynomial degree " + std::to_string(degree));
  }
  nodes_per_element_ = simplex_node_count(dim, degree);
  if (coords_.size() % static_cast<std::size_t>(dim) != 0) {
    throw MeshIntegrityError("coordinate array length is not a multiple of the dimension");
  }
  if (connectivity_.size() % nodes_per_element_ != 0) {
    throw MeshIntegrityError("connectivity length is not a multiple of " +
                             std::to_string(nodes_per_element_));
  }
  const auto nn = static_cast<int>(num_nodes());
  if (constraints_.empty()) constraints_.assign(num_nodes(), BoundaryConstraint::free());
  if (constraints_.size() != num_nodes()) {
    throw MeshIntegrityError("constraint count differs from node count");
  }
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    const auto& c = constraints_[i];
    if (c.kind == ConstraintKind::AxisSlide &&
        BoundaryConstraint::from_mask(c.frozen_mask, dim).kind != ConstraintKind::AxisSlide) {
      throw MeshIntegrityError("node " + std::to_string(i) +
                               ": slide constraint must freeze a proper non-empty subset");
    }
  }
  std::vector<int> sorted;
  for (std::size_t e = 0; e < num_elements(); ++e) {
    const auto el = element(e);
    for (int idx : el) {
      if (idx < 0 || idx >= nn) {
        throw MeshIntegrityError("element " + std::to_string(e) + " references node " +
                                 std::to_string(idx) + " out of range");
      }
    }
    sorted.assign(el.begin(), el.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw MeshIntegrityError("element " + std::to_string(e) + " repeats a node index");
    }
  }
}

Vec HighOrderMesh::node(std::size_t i) const {
  Vec x(dim_);
  for (int c = 0; c < dim_; ++c) x[c] = coords_[i * dim_ + c];
  return x;
}

void HighOrderMesh::set_node(std::size_t i, const Vec& x) {
  for (int c = 0; c < dim_; ++c) coords_[i * dim_ + c] = x[c];
}

Eigen::MatrixXd HighOrderMesh::element_coords(std::size_t e) const {
  const auto el = element(e);
  Eigen::MatrixXd X(dim_, static_cast<Eigen::Index>(el.size()));
  for (std::size_t a = 0; a < el.size(); ++a) {
    for (int c = 0; c < dim_; ++c) {
      X(c, static_cast<Eigen::Index>(a)) = coords_[static_cast<std::size_t>(el[a]) * dim_ + c];
    }
  }
  return X;
}

std::pair<Vec, Vec> HighOrderMesh::bounding_box() const {
  Vec lo = Vec::Constant(dim_, std::numeric_limits<double>::infinity());
  Vec hi = Vec::Constant(dim_, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    lo = lo.cwiseMin(node(i));
    hi = hi.cwiseMax(node(i));
  }
  return {lo, hi};
}

double HighOrderMesh::bbox_diagonal() const {
  if (num_nodes() == 0) return 0.0;
  const auto [lo, hi] = bounding_box();
  return (hi - lo).norm();
}

std::vector<EntityRef> sub_entities(const HighOrderMesh& mesh, int k) {
  const int d = mesh.dim();
  const int p = mesh.degree();
  if (k < 1 || k > d) throw ConfigError("entity dimension out of range");
  const auto element_lattice = simplex_lattice(d, p);
  const auto entity_lattice = simplex_lattice(k, p);
  std::map<LatticeIndex, int> element_slot;
  for (std::size_t i = 0; i < element_lattice.size(); ++i) {
    element_slot[element_lattice[i]] = static_cast<int>(i);
  }
  const auto subsets = local_subsimplices(d, k);

  std::map<std::vector<int>, std::size_t> seen;
  std::vector<EntityRef> out;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      std::vector<int> local = subsets[s];
      std::sort(local.begin(), local.end(),
                [&](int a, int b) { return el[a] < el[b]; });
      std::vector<int> key;
      for (int v : local) key.push_back(el[v]);

      EntityRef ref;
      ref.element = e;
      ref.dim = k;
      ref.local_index = static_cast<int>(s);
      ref.nodes.reserve(entity_lattice.size());
      for (const auto& t : entity_lattice) {
        LatticeIndex b{};
        for (int i = 0; i <= k; ++i) b[local[i]] = t[i];
        ref.nodes.push_back(el[element_slot.at(b)]);
      }

      const auto it = seen.find(key);
      if (it == seen.end()) {
        seen.emplace(std::move(key), out.size());
        out.push_back(std::move(ref));
      } else if (out[it->second].nodes != ref.nodes) {
        throw MeshIntegrityError("element " + std::to_string(e) +
                                 " disagrees with element " +
                                 std::to_string(out[it->second].element) +
                                 " on the nodes of a shared entity");
      }
    }
  }
  return out;
}

HighOrderMesh structured_mesh(const Box& box, int dim, int degree, int n) {
  if (dim < 2 || dim > 3) throw ConfigError("structured meshes support d = 2 or 3");
  if (degree < 1 || degree > kMaxDegree) {
    throw ConfigError("unsupported polynomial degree " + std::to_string(degree));
  }
  if (n < 1) throw ConfigError("subdivisions per axis must be >= 1");
  if (box.lo.size() != static_cast<std::size_t>(dim) ||
      box.hi.size() != static_cast<std::size_t>(dim)) {
    throw ConfigError("box bounds must have one entry per dimension");
  }
  for (int c = 0; c < dim; ++c) {
    if (!(box.hi[c] > box.lo[c])) throw ConfigError("degenerate box along axis " + std::to_string(c));
  }

  const int m = n * degree;  // fine lattice intervals per axis
  const int side = m + 1;
  std::vector<int> lattice_to_node;
  std::size_t total = 1;
  for (int c = 0; c < dim; ++c) total *= static_cast<std::size_t>(side);
  lattice_to_node.assign(total, -1);

  std::vector<double> coords;
  std::vector<BoundaryConstraint> constraints;
  auto node_for = [&](const std::array<int, 3>& ijk) {
    std::size_t flat = 0;
    for (int c = dim - 1; c >= 0; --c) flat = flat * side + static_cast<std::size_t>(ijk[c]);
    int& slot = lattice_to_node[flat];
    if (slot < 0) {
      slot = static_cast<int>(constraints.size());
      std::uint8_t mask = 0;
      for (int c = 0; c < dim; ++c) {
        const double t = static_cast<double>(ijk[c]) / m;
        double x = box.lo[c] + t * (box.hi[c] - box.lo[c]);
        if (ijk[c] == 0) x = box.lo[c];
        if (ijk[c] == m) x = box.hi[c];
        coords.push_back(x);
        if (ijk[c] == 0 || ijk[c] == m) mask |= static_cast<std::uint8_t>(1u << c);
      }
      constraints.push_back(BoundaryConstraint::from_mask(mask, dim));
    }
    return slot;
  };

  // Corner offsets of each simplex within a unit cell, positively oriented.
  std::vector<std::vector<std::array<int, 3>>> cell_simplices;
  if (dim == 2) {
    cell_simplices = {{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, {{0, 0, 0}, {1, 1, 0}, {0, 1, 0}}};
  } else {
    std::array<int, 3> perm{0, 1, 2};
    do {
      std::vector<std::array<int, 3>> verts;
      std::array<int, 3> v{0, 0, 0};
      verts.push_back(v);
      for (int axis : perm) {
        v[axis] = 1;
        verts.push_back(v);
      }
      // Odd permutations produce negatively oriented Kuhn simplices.
      int inversions = 0;
      for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
          if (perm[a] > perm[b]) ++inversions;
      if (inversions % 2 == 1) std::swap(verts[2], verts[3]);
      cell_simplices.push_back(verts);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  const auto lattice = simplex_lattice(dim, degree);
  std::vector<int> connectivity;
  std::array<int, 3> cell{0, 0, 0};
  const int cells_z = dim == 3 ? n : 1;
  for (cell[2] = 0; cell[2] < cells_z; ++cell[2]) {
    for (cell[1] = 0; cell[1] < n; ++cell[1]) {
      for (cell[0] = 0; cell[0] < n; ++cell[0]) {
        for (const auto& simplex : cell_simplices) {
          for (const auto& b : lattice) {
            std::array<int, 3> ijk{0, 0, 0};
            for (int c = 0; c < dim; ++c) {
              int acc = cell[c] * degree;
              for (int v = 0; v <= dim; ++v) acc += b[v] * simplex[v][c];
              ijk[c] = acc;
            }
            connectivity.push_back(node_for(ijk));
          }
        }
      }
    }
  }
  return HighOrderMesh(dim, degree, std::move(coords), std::move(connectivity),
                       std::move(constraints));
}

}  // namespace metra
