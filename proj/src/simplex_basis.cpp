#include "metra/simplex_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "metra/errors.hpp"

namespace metra {

namespace {

void check_dim(int dim) {
  if (dim < 1 || dim > 3) {
    throw ConfigError("unsupported simplex dimension " + std::to_string(dim));
  }
}

std::vector<int> support_of(const LatticeIndex& b, int dim) {
  std::vector<int> s;
  for (int i = 0; i <= dim; ++i) {
    if (b[i] != 0) s.push_back(i);
  }
  return s;
}

void enumerate(int dim, int m, int slot, int remaining, LatticeIndex& cur,
               std::vector<LatticeIndex>& out) {
  if (slot == dim) {
    cur[dim] = remaining;
    out.push_back(cur);
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    cur[slot] = v;
    enumerate(dim, m, slot + 1, remaining - v, cur, out);
  }
}

double monomial(const Vec& xi, const std::array<int, 3>& e, int dim) {
  double v = 1.0;
  for (int j = 0; j < dim; ++j) {
    for (int r = 0; r < e[j]; ++r) v *= xi[j];
  }
  return v;
}

double monomial_derivative(const Vec& xi, const std::array<int, 3>& e, int dim, int dir) {
  if (e[dir] == 0) return 0.0;
  double v = e[dir];
  for (int j = 0; j < dim; ++j) {
    const int power = j == dir ? e[j] - 1 : e[j];
    for (int r = 0; r < power; ++r) v *= xi[j];
  }
  return v;
}

}  // namespace

std::size_t simplex_node_count(int dim, int degree) {
  std::size_t n = 1;
  for (int i = 1; i <= dim; ++i) {
    n = n * static_cast<std::size_t>(degree + i) / static_cast<std::size_t>(i);
  }
  return n;
}

std::vector<LatticeIndex> simplex_lattice(int dim, int m) {
  check_dim(dim);
  if (m < 1) throw ConfigError("lattice order must be positive");
  std::vector<LatticeIndex> all;
  LatticeIndex cur{};
  enumerate(dim, m, 0, m, cur, all);
  std::stable_sort(all.begin(), all.end(), [dim](const LatticeIndex& a, const LatticeIndex& b) {
    const auto sa = support_of(a, dim);
    const auto sb = support_of(b, dim);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return std::lexicographical_compare(b.begin(), b.begin() + dim + 1, a.begin(),
                                        a.begin() + dim + 1);
  });
  return all;
}

std::vector<Vec> lattice_points(int dim, int m) {
  std::vector<Vec> pts;
  for (const auto& b : simplex_lattice(dim, m)) {
    Vec xi(dim);
    for (int j = 0; j < dim; ++j) xi[j] = static_cast<double>(b[j + 1]) / m;
    pts.push_back(xi);
  }
  return pts;
}

std::vector<Vec> master_nodes(int dim, int degree) {
  check_dim(dim);
  if (degree < 1 || degree > kMaxDegree) {
    throw ConfigError("unsupported polynomial degree " + std::to_string(degree) +
                      " (supported: 1.." + std::to_string(kMaxDegree) + ")");
  }
  return lattice_points(dim, degree);
}

std::vector<std::vector<int>> local_subsimplices(int dim, int k) {
  std::vector<std::vector<int>> out;
  std::vector<bool> pick(dim + 1, false);
  std::fill(pick.begin(), pick.begin() + k + 1, true);
  do {
    std::vector<int> combo;
    for (int i = 0; i <= dim; ++i) {
      if (pick[i]) combo.push_back(i);
    }
    out.push_back(combo);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return out;
}

MasterSimplex MasterSimplex::make(int dim, int degree) {
  MasterSimplex m;
  m.dim = dim;
  m.degree = degree;
  m.nodes = master_nodes(dim, degree);
  m.lattice = simplex_lattice(dim, degree);
  return m;
}

int MasterSimplex::index_of(const LatticeIndex& b) const {
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (lattice[i] == b) return static_cast<int>(i);
  }
  return -1;
}

LagrangeBasis::LagrangeBasis(int dim, int degree, std::vector<Vec> nodes)
    : dim_(dim), degree_(degree), nodes_(std::move(nodes)) {
  check_dim(dim);
  for (const auto& b : simplex_lattice(dim, degree)) {
    std::array<int, 3> e{};
    for (int j = 0; j < dim; ++j) e[j] = b[j + 1];
    exponents_.push_back(e);
  }
  const auto n = static_cast<Eigen::Index>(exponents_.size());
  if (static_cast<Eigen::Index>(nodes_.size()) != n) {
    throw ConfigError("node count does not match the polynomial space dimension");
  }
  Eigen::MatrixXd vandermonde(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      vandermonde(i, j) = monomial(nodes_[i], exponents_[j], dim);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(vandermonde);
  if (!lu.isInvertible()) throw ConfigError("nodal set is not unisolvent");
  coefficients_ = lu.inverse();
}

LagrangeBasis LagrangeBasis::equispaced(int dim, int degree) {
  return LagrangeBasis(dim, degree, master_nodes(dim, degree));
}

Eigen::VectorXd LagrangeBasis::values(const Vec& xi) const {
  const auto n = static_cast<Eigen::Index>(exponents_.size());
  Eigen::VectorXd m(n);
  for (Eigen::Index j = 0; j < n; ++j) m[j] = monomial(xi, exponents_[j], dim_);
  return coefficients_.transpose() * m;
}

Eigen::MatrixXd LagrangeBasis::gradients(const Vec& xi) const {
  const auto n = static_cast<Eigen::Index>(exponents_.size());
  Eigen::MatrixXd dm(n, dim_);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int c = 0; c < dim_; ++c) dm(j, c) = monomial_derivative(xi, exponents_[j], dim_, c);
  }
  return coefficients_.transpose() * dm;
}

EquilateralFrame equilateral_jacobian(int dim) {
  check_dim(dim);
  EquilateralFrame f;
  f.dim = dim;
  f.jacobian = Mat::Zero(dim, dim);
  const double s3 = std::sqrt(3.0);
  switch (dim) {
    case 1:
      f.jacobian(0, 0) = 1.0;
      break;
    case 2:
      f.jacobian << 1.0, 0.5, 0.0, s3 / 2.0;
      break;
    default:
      f.jacobian << 1.0, 0.5, 0.5, 0.0, s3 / 2.0, s3 / 6.0, 0.0, 0.0, std::sqrt(6.0) / 3.0;
      break;
  }
  f.det = f.jacobian.determinant();
  f.inverse = f.jacobian.inverse();
  return f;
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw ConfigError("quadrature needs at least one point per direction");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0;
    double p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[n - 1 - i] = 0.5 * (t + 1.0);
    w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

double master_volume(int dim) {
  switch (dim) {
    case 1:
      return 1.0;
    case 2:
      return 0.5;
    case 3:
      return 1.0 / 6.0;
    default:
      throw ConfigError("unsupported simplex dimension " + std::to_string(dim));
  }
}

QuadratureRule quadrature(int dim, int n_1d) {
  check_dim(dim);
  // A single collapsed point cannot integrate the (1-u)^2 (1-v) Duffy weight.
  if (dim == 3 && n_1d < 2) {
    throw ConfigError("tetrahedral rules need at least 2 points per direction");
  }
  std::vector<double> x, w;
  gauss_legendre(n_1d, x, w);
  QuadratureRule rule;
  rule.dim = dim;
  rule.exactness = 2 * n_1d - dim;
  if (dim == 1) {
    for (int i = 0; i < n_1d; ++i) {
      Vec p(1);
      p << x[i];
      rule.points.push_back(p);
      rule.weights.push_back(w[i]);
    }
  } else if (dim == 2) {
    for (int i = 0; i < n_1d; ++i) {
      for (int j = 0; j < n_1d; ++j) {
        Vec p(2);
        p << x[i], x[j] * (1.0 - x[i]);
        rule.points.push_back(p);
        rule.weights.push_back(w[i] * w[j] * (1.0 - x[i]));
      }
    }
  } else {
    for (int i = 0; i < n_1d; ++i) {
      for (int j = 0; j < n_1d; ++j) {
        for (int k = 0; k < n_1d; ++k) {
          const double u = x[i], v = x[j], t = x[k];
          Vec p(3);
          p << u, v * (1.0 - u), t * (1.0 - u) * (1.0 - v);
          rule.points.push_back(p);
          rule.weights.push_back(w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - v));
        }
      }
    }
  }
  return rule;
}

Mat map_jacobian(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& grads) {
  return coords * grads;
}

Mat map_jacobian(const Eigen::MatrixXd& coords, const LagrangeBasis& basis, const Vec& xi) {
  return coords * basis.gradients(xi);
}

Tabulation Tabulation::make(const LagrangeBasis& basis, const QuadratureRule& rule) {
  Tabulation t = make(basis, rule.points);
  t.weights = rule.weights;
  return t;
}

Tabulation Tabulation::make(const LagrangeBasis& basis, const std::vector<Vec>& points) {
  Tabulation t;
  t.points = points;
  t.weights.assign(points.size(), 0.0);
  t.values.resize(static_cast<Eigen::Index>(points.size()),
                  static_cast<Eigen::Index>(basis.size()));
  for (std::size_t q = 0; q < points.size(); ++q) {
    t.values.row(static_cast<Eigen::Index>(q)) = basis.values(points[q]).transpose();
    t.gradients.push_back(basis.gradients(points[q]));
  }
  return t;
}

}  // namespace metra
