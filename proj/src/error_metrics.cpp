#include "metra/error_metrics.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "metra/errors.hpp"
#include "metra/parallel.hpp"
#include "metra/simplex_basis.hpp"
#include "metra/stats.hpp"

namespace metra {

namespace {

constexpr double kPi = std::numbers::pi;

AnalyticFunction make_arctan(AnalyticFunction::Kind kind, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  return {kind, gamma};
}

// Legendre-Gauss-Lobatto points on [-1, 1], ascending.
std::vector<double> lgl_points(int n) {
  std::vector<double> x(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) x[k] = -std::cos(kPi * k / n);
  if (n < 2) return x;
  for (int k = 1; k < n; ++k) {
    double xi = x[k];
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = xi;
      for (int m = 2; m <= n; ++m) {
        const double p2 = ((2.0 * m - 1.0) * xi * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      const double dx = (xi * p1 - p0) / ((n + 1.0) * p1);
      xi -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    x[k] = xi;
  }
  return x;
}

// 1D warp: interpolant through equispaced points of (LGL - equispaced).
double warp_factor(int n, double r) {
  const auto lgl = lgl_points(n);
  double warp = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double ri = -1.0 + 2.0 * i / n;
    double l = 1.0;
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      const double rj = -1.0 + 2.0 * j / n;
      l *= (r - rj) / (ri - rj);
    }
    warp += l * (lgl[i] - ri);
  }
  if (std::abs(r) < 1.0 - 1e-10) return warp / (1.0 - r * r);
  return 0.0;
}

// Divided warp used by the tetrahedral face shift (nodes descending).
double eval_warp(int p, const std::vector<double>& xnodes, double xout) {
  std::vector<double> xeq(static_cast<std::size_t>(p) + 1);
  for (int i = 0; i <= p; ++i) xeq[i] = -1.0 + 2.0 * (p - i) / p;
  double warp = 0.0;
  for (int i = 0; i <= p; ++i) {
    double d = xnodes[i] - xeq[i];
    for (int j = 1; j < p; ++j)
      if (i != j) d *= (xout - xeq[j]) / (xeq[i] - xeq[j]);
    if (i != 0) d = -d / (xeq[i] - xeq[0]);
    if (i != p) d = d / (xeq[i] - xeq[p]);
    warp += d;
  }
  return warp;
}

std::array<double, 2> eval_shift(int p, double alpha, double l1, double l2, double l3) {
  auto gx = lgl_points(p);
  for (double& v : gx) v = -v;
  const double w1 = l2 * l3 * 4.0 * eval_warp(p, gx, l3 - l2) * (1.0 + (alpha * l1) * (alpha * l1));
  const double w2 = l1 * l3 * 4.0 * eval_warp(p, gx, l1 - l3) * (1.0 + (alpha * l2) * (alpha * l2));
  const double w3 = l1 * l2 * 4.0 * eval_warp(p, gx, l2 - l1) * (1.0 + (alpha * l3) * (alpha * l3));
  return {w1 + std::cos(2 * kPi / 3) * w2 + std::cos(4 * kPi / 3) * w3,
          std::sin(2 * kPi / 3) * w2 + std::sin(4 * kPi / 3) * w3};
}

// Optimized blending exponents for p = 1..15.
constexpr std::array<double, 15> kAlpha2D = {0.0,    0.0,    1.4152, 0.1001, 0.2751,
                                             0.9800, 1.0999, 1.2832, 1.3648, 1.4773,
                                             1.4959, 1.5743, 1.5770, 1.6223, 1.6258};
constexpr std::array<double, 15> kAlpha3D = {0.0,    0.0,     0.0,    0.1002, 1.1332,
                                             1.5608, 1.3413,  1.2577, 1.1603, 1.10153,
                                             0.6080, 0.4523,  0.8856, 0.8717, 0.9655};

std::vector<Vec> triangle_nodes(int n) {
  const double alpha = kAlpha2D[n - 1];
  const double s3 = std::sqrt(3.0);
  // equilateral vertices (-1,-1/sqrt3), (1,-1/sqrt3), (0,2/sqrt3) <-> master 0, 1, 2
  std::vector<Vec> out;
  for (const auto& b : simplex_lattice(2, n)) {
    const double L2 = b[0] / double(n), L3 = b[1] / double(n), L1 = b[2] / double(n);
    double x = -L2 + L3;
    double y = (-L2 - L3 + 2.0 * L1) / s3;
    const double w1 = 4 * L2 * L3 * warp_factor(n, L3 - L2) * (1 + (alpha * L1) * (alpha * L1));
    const double w2 = 4 * L1 * L3 * warp_factor(n, L1 - L3) * (1 + (alpha * L2) * (alpha * L2));
    const double w3 = 4 * L1 * L2 * warp_factor(n, L2 - L1) * (1 + (alpha * L3) * (alpha * L3));
    x += w1 + std::cos(2 * kPi / 3) * w2 + std::cos(4 * kPi / 3) * w3;
    y += std::sin(2 * kPi / 3) * w2 + std::sin(4 * kPi / 3) * w3;
    // back to barycentrics
    const double l1 = (y * s3 + 1.0) / 3.0;  // vertex 2
    const double l3 = (x + 1.0 - l1) / 2.0;  // vertex 1
    Vec xi(2);
    xi << l3, l1;
    out.push_back(xi);
  }
  return out;
}

std::vector<Vec> tetrahedron_nodes(int n) {
  const double alpha = kAlpha3D[n - 1];
  const double tol = 1e-10;
  using V3 = Eigen::Vector3d;
  const V3 v1(-1, -1 / std::sqrt(3.0), -1 / std::sqrt(6.0));
  const V3 v2(1, -1 / std::sqrt(3.0), -1 / std::sqrt(6.0));
  const V3 v3(0, 2 / std::sqrt(3.0), -1 / std::sqrt(6.0));
  const V3 v4(0, 0, 3 / std::sqrt(6.0));
  std::array<V3, 4> t1 = {v2 - v1, v2 - v1, v3 - v2, v3 - v1};
  std::array<V3, 4> t2 = {v3 - 0.5 * (v1 + v2), v4 - 0.5 * (v1 + v2), v4 - 0.5 * (v2 + v3),
                          v4 - 0.5 * (v1 + v3)};
  for (int f = 0; f < 4; ++f) {
    t1[f].normalize();
    t2[f].normalize();
  }
  Eigen::Matrix3d T;
  T << v2 - v1, v3 - v1, v4 - v1;
  const Eigen::Matrix3d Tinv = T.inverse();

  std::vector<Vec> out;
  for (const auto& b : simplex_lattice(3, n)) {
    // L3 <-> v1 (master 0), L4 <-> v2, L2 <-> v3, L1 <-> v4
    const double L3 = b[0] / double(n), L4 = b[1] / double(n), L2 = b[2] / double(n),
                 L1 = b[3] / double(n);
    V3 xyz = L3 * v1 + L4 * v2 + L2 * v3 + L1 * v4;
    V3 shift = V3::Zero();
    const std::array<std::array<double, 4>, 4> faces = {{{L1, L2, L3, L4},
                                                         {L2, L1, L3, L4},
                                                         {L3, L1, L4, L2},
                                                         {L4, L1, L3, L2}}};
    for (int f = 0; f < 4; ++f) {
      const auto [La, Lb, Lc, Ld] = faces[f];
      const auto w = eval_shift(n, alpha, Lb, Lc, Ld);
      double blend = Lb * Lc * Ld;
      const double denom = (Lb + 0.5 * La) * (Lc + 0.5 * La) * (Ld + 0.5 * La);
      if (denom > tol) blend = (1 + (alpha * La) * (alpha * La)) * blend / denom;
      shift += blend * w[0] * t1[f] + blend * w[1] * t2[f];
      const int positive = (Lb > tol) + (Lc > tol) + (Ld > tol);
      if (La < tol && positive < 3) {
        // edge points are set, not accumulated
        shift = w[0] * t1[f] + w[1] * t2[f];
      }
    }
    xyz += shift;
    const V3 lam = Tinv * (xyz - v1);
    Vec xi(3);
    xi << lam(0), lam(1), lam(2);
    out.push_back(xi);
  }
  return out;
}

}  // namespace

AnalyticFunction AnalyticFunction::arctan2d(double gamma) { return make_arctan(Kind::Arctan2D, gamma); }
AnalyticFunction AnalyticFunction::arctan3d(double gamma) { return make_arctan(Kind::Arctan3D, gamma); }

double AnalyticFunction::operator()(const Vec& x) const {
  if (kind == Kind::Arctan2D) return std::atan(gamma * (10.0 * x(1) + std::cos(2 * kPi * x(0))));
  return std::atan(gamma * (10.0 * x(2) + std::cos(2 * kPi * x(0)) * std::cos(2 * kPi * x(1))));
}

std::vector<Vec> warp_blend_nodes(int dim, int degree) {
  if (degree < 1 || degree > kMaxDegree) throw ConfigError("unsupported degree " + std::to_string(degree));
  if (degree <= 2 || dim == 1) return master_nodes(dim, degree);
  if (dim == 2) return triangle_nodes(degree);
  if (dim == 3) return tetrahedron_nodes(degree);
  throw ConfigError("unsupported dimension " + std::to_string(dim));
}

std::vector<double> interpolate(const HighOrderMesh& mesh, const ScalarFunction& u) {
  const int d = mesh.dim(), p = mesh.degree();
  const auto basis = LagrangeBasis::equispaced(d, p);
  const auto wb = warp_blend_nodes(d, p);
  const auto tab = Tabulation::make(basis, wb);
  // B(i, j) = N_j(wb_i); coefficients = B^{-1} u(wb)
  const Eigen::MatrixXd transfer = tab.values.fullPivLu().inverse();

  const std::size_t ne = mesh.num_elements();
  std::vector<Eigen::VectorXd> local(ne);
  parallel_for(ne, [&](std::size_t e) {
    const Eigen::MatrixXd X = mesh.element_coords(e);
    Eigen::VectorXd vals(static_cast<Eigen::Index>(wb.size()));
    for (std::size_t i = 0; i < wb.size(); ++i) {
      const Vec x = X * tab.values.row(static_cast<Eigen::Index>(i)).transpose();
      vals(static_cast<Eigen::Index>(i)) = u(x);
    }
    local[e] = transfer * vals;
  });
  std::vector<double> coeff(mesh.num_nodes(), 0.0);
  std::vector<char> seen(mesh.num_nodes(), 0);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto el = mesh.element(e);
    for (std::size_t a = 0; a < el.size(); ++a) {
      if (seen[el[a]]) continue;
      seen[el[a]] = 1;
      coeff[el[a]] = local[e](static_cast<Eigen::Index>(a));
    }
  }
  return coeff;
}

ErrorResult l2_error(const HighOrderMesh& mesh, const ScalarFunction& u,
                     const std::vector<double>& coefficients, int n_1d) {
  if (coefficients.size() != mesh.num_nodes()) throw ConfigError("coefficient count differs from node count");
  const int d = mesh.dim(), p = mesh.degree();
  const auto basis = LagrangeBasis::equispaced(d, p);
  const auto tab = Tabulation::make(basis, quadrature(d, n_1d > 0 ? n_1d : 3 * p + 2));
  ErrorResult out;
  out.per_element.resize(mesh.num_elements());
  parallel_for(mesh.num_elements(), [&](std::size_t e) {
    const Eigen::MatrixXd X = mesh.element_coords(e);
    const auto el = mesh.element(e);
    Eigen::VectorXd c(static_cast<Eigen::Index>(el.size()));
    for (std::size_t a = 0; a < el.size(); ++a) c(static_cast<Eigen::Index>(a)) = coefficients[el[a]];
    double acc = 0.0;
    for (std::size_t q = 0; q < tab.size(); ++q) {
      const auto N = tab.values.row(static_cast<Eigen::Index>(q));
      const Vec x = X * N.transpose();
      const double jac = std::abs((X * tab.gradients[q]).determinant());
      const double r = u(x) - N.dot(c);
      acc += tab.weights[q] * jac * r * r;
    }
    out.per_element[e] = std::sqrt(acc);
  });
  std::vector<double> sq(out.per_element.size());
  for (std::size_t e = 0; e < sq.size(); ++e) sq[e] = out.per_element[e] * out.per_element[e];
  out.global = std::sqrt(pairwise_sum(sq));
  return out;
}

ErrorResult interpolation_error(const HighOrderMesh& mesh, const ScalarFunction& u, int n_1d) {
  return l2_error(mesh, u, interpolate(mesh, u), n_1d);
}

std::vector<double> l2_projection(const HighOrderMesh& mesh, const ScalarFunction& u, int n_1d) {
  const int d = mesh.dim(), p = mesh.degree();
  const auto basis = LagrangeBasis::equispaced(d, p);
  const auto tab = Tabulation::make(basis, quadrature(d, n_1d > 0 ? n_1d : 3 * p + 2));
  const std::size_t ne = mesh.num_elements();
  const auto nloc = static_cast<Eigen::Index>(basis.size());
  std::vector<Eigen::MatrixXd> mass(ne);
  std::vector<Eigen::VectorXd> load(ne);
  parallel_for(ne, [&](std::size_t e) {
    const Eigen::MatrixXd X = mesh.element_coords(e);
    mass[e] = Eigen::MatrixXd::Zero(nloc, nloc);
    load[e] = Eigen::VectorXd::Zero(nloc);
    for (std::size_t q = 0; q < tab.size(); ++q) {
      const Eigen::VectorXd N = tab.values.row(static_cast<Eigen::Index>(q)).transpose();
      const Vec x = X * N;
      const double w = tab.weights[q] * std::abs((X * tab.gradients[q]).determinant());
      mass[e].noalias() += w * N * N.transpose();
      load[e] += w * u(x) * N;
    }
  });
  const auto nn = static_cast<Eigen::Index>(mesh.num_nodes());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(ne * static_cast<std::size_t>(nloc * nloc));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nn);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto el = mesh.element(e);
    for (Eigen::Index a = 0; a < nloc; ++a) {
      b(el[a]) += load[e](a);
      for (Eigen::Index c = 0; c < nloc; ++c) triplets.emplace_back(el[a], el[c], mass[e](a, c));
    }
  }
  Eigen::SparseMatrix<double> M(nn, nn);
  M.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-10);
  cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * nn));
  cg.compute(M);
  // start from the interpolant
  const auto guess = interpolate(mesh, u);
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(guess.data(), nn);
  const Eigen::VectorXd x = cg.solveWithGuess(b, x0);
  if (cg.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "L2 projection CG did not converge: relative residual " << cg.error() << " after "
        << cg.iterations() << " iterations";
    throw SolverError(msg.str());
  }
  return {x.data(), x.data() + x.size()};
}

ErrorResult approximation_error(const HighOrderMesh& mesh, const ScalarFunction& u, int n_1d) {
  return l2_error(mesh, u, l2_projection(mesh, u, n_1d), n_1d);
}

}  // namespace metra
