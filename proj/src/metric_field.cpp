#include "metra/metric_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "metra/errors.hpp"

namespace metra {

namespace {

using EigenSolver = Eigen::SelfAdjointEigenSolver<Mat>;

constexpr double kLocateTol = 1e-8;
constexpr double kNewtonTol = 1e-12;
constexpr int kNewtonMaxIters = 30;

Mat symmetrized(const Mat& M) { return 0.5 * (M + M.transpose()); }

// Projects master coordinates onto the closed simplex by clipping barycentrics.
Vec clamp_to_simplex(const Vec& xi) {
  const auto k = xi.size();
  Eigen::VectorXd bary(k + 1);
  bary[0] = 1.0 - xi.sum();
  bary.tail(k) = xi;
  bary = bary.cwiseMax(0.0);
  bary /= bary.sum();
  return bary.tail(k);
}

double min_barycentric(const Vec& xi) { return std::min(xi.minCoeff(), 1.0 - xi.sum()); }

}  // namespace

void validate_metric(const Mat& M) {
  if (M.rows() != M.cols() || M.rows() < 1 || !M.allFinite()) {
    throw SingularMetricError("metric must be a finite square matrix");
  }
  const double scale = std::max(M.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw SingularMetricError("metric is not symmetric");
  }
  EigenSolver es(symmetrized(M), Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw SingularMetricError("metric is not positive definite");
  }
}

Mat metric_log(const Mat& M) {
  EigenSolver es(symmetrized(M));
  Vec lambda = es.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] > 0.0)) {
      throw SingularMetricError("metric has a non-positive eigenvalue");
    }
    lambda[i] = std::log(std::max(lambda[i], kEigenFloor));
  }
  const Mat& Q = es.eigenvectors();
  return Q * lambda.asDiagonal() * Q.transpose();
}

Mat metric_exp(const Mat& S) {
  EigenSolver es(symmetrized(S));
  const Vec lambda = es.eigenvalues().array().exp();
  const Mat& Q = es.eigenvectors();
  return Q * lambda.asDiagonal() * Q.transpose();
}

namespace {

// Frechet derivative of exp at S = Q diag(lambda) Q^T in direction E.
Mat exp_derivative(const Vec& lambda, const Mat& Q, const Mat& E) {
  Mat rotated = Q.transpose() * E * Q;
  const auto n = lambda.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double delta = lambda[i] - lambda[j];
      const double divided =
          delta == 0.0 ? std::exp(lambda[j]) : std::exp(lambda[j]) * std::expm1(delta) / delta;
      rotated(i, j) *= divided;
    }
  }
  return Q * rotated * Q.transpose();
}

}  // namespace

Mat metric_exp_derivative(const Mat& S, const Mat& E) {
  EigenSolver es(symmetrized(S));
  return exp_derivative(es.eigenvalues(), es.eigenvectors(), E);
}

Mat factorize(const Mat& M) {
  validate_metric(M);
  Eigen::LLT<Mat> llt(symmetrized(M));
  if (llt.info() != Eigen::Success) throw SingularMetricError("Cholesky factorization failed");
  return llt.matrixU();
}

ConstantMetric::ConstantMetric(Mat M) : M_(std::move(M)) { validate_metric(M_); }

ConstantMetric ConstantMetric::from_sizes(const std::vector<double>& sizes) {
  if (sizes.empty() || sizes.size() > 3) throw ConfigError("constant metric needs 1..3 sizes");
  Mat M = Mat::Zero(static_cast<Eigen::Index>(sizes.size()), static_cast<Eigen::Index>(sizes.size()));
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(sizes[i] > 0.0)) throw ConfigError("metric sizes must be positive");
    M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 / (sizes[i] * sizes[i]);
  }
  return ConstantMetric(M);
}

MetricSample ConstantMetric::eval_with_gradient(const Vec&) const {
  MetricSample s;
  s.value = M_;
  for (auto& g : s.gradient) g = Mat::Zero(M_.rows(), M_.cols());
  return s;
}

BoundaryLayerMetric::BoundaryLayerMetric(BoundaryLayerParams params) : params_(params) {
  if (!(params_.h_m > 0.0) || !(params_.h_min > 0.0) || !(params_.alpha >= 0.0)) {
    throw ConfigError("boundary-layer metric needs h_m > 0, h_min > 0, alpha >= 0");
  }
}

Mat BoundaryLayerMetric::eval(const Vec& x) const { return eval_with_gradient(x).value; }

MetricSample BoundaryLayerMetric::eval_with_gradient(const Vec& x) const {
  using std::numbers::pi;
  const auto& p = params_;
  const double norm = std::sqrt(100.0 + 4.0 * pi * pi);

  // Deformation map phi and its first and second derivatives.
  double phi2 = x[1];
  Mat G = Mat::Identity(2, 2);
  std::array<Mat, 2> dG{Mat::Zero(2, 2), Mat::Zero(2, 2)};
  if (p.deformation) {
    const double c = std::cos(2.0 * pi * x[0]);
    const double s = std::sin(2.0 * pi * x[0]);
    phi2 = (10.0 * x[1] + p.wave_sign * c) / norm;
    G(1, 0) = -2.0 * pi * p.wave_sign * s / norm;
    G(1, 1) = 10.0 / norm;
    dG[0](1, 0) = -4.0 * pi * pi * p.wave_sign * c / norm;
  }

  const double h = p.h_min + p.alpha * std::abs(phi2);
  const double sign = phi2 > 0.0 ? 1.0 : (phi2 < 0.0 ? -1.0 : 0.0);
  Mat D = Mat::Zero(2, 2);
  D(0, 0) = 1.0;
  D(1, 1) = 1.0 / (h * h);
  const double scale = 1.0 / (p.h_m * p.h_m);

  MetricSample out;
  out.value = scale * G.transpose() * D * G;
  for (int c = 0; c < 2; ++c) {
    const double dh = p.alpha * sign * G(1, c);
    Mat dD = Mat::Zero(2, 2);
    dD(1, 1) = -2.0 * dh / (h * h * h);
    out.gradient[c] = scale * (dG[c].transpose() * D * G + G.transpose() * D * dG[c] +
                               G.transpose() * dD * G);
  }
  out.gradient[2] = Mat::Zero(2, 2);
  return out;
}

std::unique_ptr<MetricField> make_analytic_field(const AnalyticMetricSpec& spec, int dim) {
  if (const auto* diag = std::get_if<ConstantDiagSpec>(&spec)) {
    std::vector<double> sizes = diag->sizes;
    // A single size h gives diag(1, 1/h^2[, 1/h^2]).
    if (sizes.size() == 1 && dim > 1) {
      const double h = sizes[0];
      sizes.assign(static_cast<std::size_t>(dim), h);
      sizes[0] = 1.0;
    }
    if (sizes.size() != static_cast<std::size_t>(dim)) {
      throw ConfigError("constant metric needs 1 or " + std::to_string(dim) + " sizes");
    }
    return std::make_unique<ConstantMetric>(ConstantMetric::from_sizes(sizes));
  }
  if (dim != 2) throw ConfigError("the boundary-layer preset is two-dimensional");
  return std::make_unique<BoundaryLayerMetric>(std::get<BoundaryLayerSpec>(spec).params);
}

DiscreteMetricField::DiscreteMetricField(HighOrderMesh background, std::vector<Mat> nodal_metrics)
    : background_(std::move(background)),
      nodal_(std::move(nodal_metrics)),
      basis_(LagrangeBasis::equispaced(background_.dim(), background_.degree())) {
  const int d = background_.dim();
  if (nodal_.size() != background_.num_nodes()) {
    throw ConfigError("nodal metric count (" + std::to_string(nodal_.size()) +
                      ") differs from background node count (" +
                      std::to_string(background_.num_nodes()) + ")");
  }
  nodal_log_.reserve(nodal_.size());
  for (std::size_t i = 0; i < nodal_.size(); ++i) {
    if (nodal_[i].rows() != d || nodal_[i].cols() != d) {
      throw ConfigError("nodal metric " + std::to_string(i) + " has the wrong size");
    }
    try {
      validate_metric(nodal_[i]);
    } catch (const SingularMetricError& err) {
      throw SingularMetricError("nodal metric " + std::to_string(i) + ": " + err.what());
    }
    nodal_log_.push_back(metric_log(nodal_[i]));
  }

  const std::size_t ne = background_.num_elements();
  if (ne == 0) throw ConfigError("background mesh has no elements");
  double mean_diag = 0.0;
  const auto master = basis_.nodes();
  for (std::size_t e = 0; e < ne; ++e) {
    element_coords_.push_back(background_.element_coords(e));
    const auto& X = element_coords_.back();
    Vec lo = X.rowwise().minCoeff();
    Vec hi = X.rowwise().maxCoeff();
    const double diag = (hi - lo).norm();

    // Straight-sided elements are inverted in closed form.
    Mat J(d, d);
    for (int c = 0; c < d; ++c) J.col(c) = X.col(c + 1) - X.col(0);
    bool affine = std::abs(J.determinant()) > 0.0;
    for (std::size_t a = 0; affine && a < master.size(); ++a) {
      const Vec y = X.col(0) + J * master[a];
      affine = (y - X.col(static_cast<Eigen::Index>(a))).norm() <= 1e-12 * (1.0 + diag);
    }
    affine_.push_back(affine ? 1 : 0);
    affine_inverse_.push_back(affine ? Mat(J.inverse()) : Mat());

    // Curved elements may bulge past their nodes.
    const double pad = affine ? 1e-9 * (1.0 + diag) : 0.1 * diag;
    lo.array() -= pad;
    hi.array() += pad;
    element_boxes_.emplace_back(lo, hi);
    mean_diag += diag;
  }
  mean_diag /= static_cast<double>(ne);

  auto [lo, hi] = background_.bounding_box();
  for (const auto& [blo, bhi] : element_boxes_) {
    lo = lo.cwiseMin(blo);
    hi = hi.cwiseMax(bhi);
  }
  grid_origin_ = lo;
  grid_cell_ = std::max(mean_diag, 1e-300);
  std::size_t total = 1;
  for (int c = 0; c < d; ++c) {
    grid_cells_[c] = std::clamp(static_cast<int>(std::ceil((hi[c] - lo[c]) / grid_cell_)), 1, 4096);
    total *= static_cast<std::size_t>(grid_cells_[c]);
  }
  grid_.assign(total, {});
  auto cell_index = [&](const Vec& x, int c) {
    return std::clamp(static_cast<int>(std::floor((x[c] - grid_origin_[c]) / grid_cell_)), 0,
                      grid_cells_[c] - 1);
  };
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& [blo, bhi] = element_boxes_[e];
    std::array<int, 3> a{0, 0, 0}, b{0, 0, 0};
    for (int c = 0; c < d; ++c) {
      a[c] = cell_index(blo, c);
      b[c] = cell_index(bhi, c);
    }
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i)
          grid_[(static_cast<std::size_t>(k) * grid_cells_[1] + j) * grid_cells_[0] + i].push_back(e);
  }
}

DiscreteMetricField DiscreteMetricField::sample(const MetricField& field, HighOrderMesh background) {
  if (field.dim() != background.dim()) throw ConfigError("field and background dimensions differ");
  std::vector<Mat> nodal;
  nodal.reserve(background.num_nodes());
  for (std::size_t i = 0; i < background.num_nodes(); ++i) nodal.push_back(field.eval(background.node(i)));
  return DiscreteMetricField(std::move(background), std::move(nodal));
}

bool DiscreteMetricField::invert(std::size_t e, const Vec& x, Vec& xi) const {
  const int d = background_.dim();
  const auto& X = element_coords_[e];
  if (affine_[e]) {
    xi = affine_inverse_[e] * (x - X.col(0));
    return true;
  }
  xi = Vec::Constant(d, 1.0 / (d + 1));
  for (int it = 0; it < kNewtonMaxIters; ++it) {
    const Vec residual = X * basis_.values(xi) - x;
    const Mat J = X * basis_.gradients(xi);
    const double det = J.determinant();
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) return false;
    const Vec step = J.inverse() * residual;
    xi -= step;
    if (!xi.allFinite() || xi.cwiseAbs().maxCoeff() > 1e6) return false;
    if (step.norm() < kNewtonTol) return true;
  }
  // Accept a stagnated iterate whose residual is already at round-off level.
  const Vec residual = X * basis_.values(xi) - x;
  return residual.norm() <= 1e-12 * (1.0 + x.norm());
}

DiscreteMetricField::Location DiscreteMetricField::locate(const Vec& x, bool strict) const {
  const int d = background_.dim();
  const double inside_tol = 1e-10;
  bool newton_failed = false;
  Vec xi;
  auto try_element = [&](std::size_t e) {
    const auto& [blo, bhi] = element_boxes_[e];
    for (int c = 0; c < d; ++c) {
      if (x[c] < blo[c] - kLocateTol || x[c] > bhi[c] + kLocateTol) return false;
    }
    if (!invert(e, x, xi)) {
      newton_failed = true;
      return false;
    }
    return min_barycentric(xi) >= -inside_tol;
  };

  std::array<int, 3> cell{0, 0, 0};
  bool in_grid = true;
  for (int c = 0; c < d; ++c) {
    const double t = std::floor((x[c] - grid_origin_[c]) / grid_cell_);
    if (t < 0 || t >= grid_cells_[c]) in_grid = false;
    cell[c] = std::clamp(static_cast<int>(t), 0, grid_cells_[c] - 1);
  }
  if (in_grid) {
    const auto& bucket =
        grid_[(static_cast<std::size_t>(cell[2]) * grid_cells_[1] + cell[1]) * grid_cells_[0] + cell[0]];
    for (std::size_t e : bucket) {
      if (try_element(e)) return {e, clamp_to_simplex(xi), true};
    }
  }
  for (std::size_t e = 0; e < element_coords_.size(); ++e) {
    if (try_element(e)) return {e, clamp_to_simplex(xi), true};
  }

  // Nearest element: clip the (unconstrained) inverse to the simplex.
  double best = std::numeric_limits<double>::infinity();
  Location nearest;
  for (std::size_t e = 0; e < element_coords_.size(); ++e) {
    Vec guess;
    if (!invert(e, x, guess)) continue;
    const Vec clipped = clamp_to_simplex(guess);
    const double dist = (element_coords_[e] * basis_.values(clipped) - x).norm();
    if (dist < best) {
      best = dist;
      nearest = {e, clipped, false};
    }
  }
  if (best <= kLocateTol) {
    nearest.inside = true;
    return nearest;
  }
  if (strict || !std::isfinite(best)) {
    if (newton_failed && !std::isfinite(best)) {
      throw LocationError("element inversion did not converge near the query point");
    }
    throw OutOfDomainError("point lies outside the background mesh");
  }
  return nearest;
}

Mat DiscreteMetricField::blended_log(const Location& loc) const {
  const int d = background_.dim();
  const Eigen::VectorXd N = basis_.values(loc.xi);
  const auto el = background_.element(loc.element);
  Mat L = Mat::Zero(d, d);
  for (std::size_t a = 0; a < el.size(); ++a) L += N[static_cast<Eigen::Index>(a)] * nodal_log_[el[a]];
  return L;
}

Mat DiscreteMetricField::interpolate(const Vec& x) const {
  return metric_exp(blended_log(locate(x, true)));
}

Mat DiscreteMetricField::eval(const Vec& x) const {
  return metric_exp(blended_log(locate(x, false)));
}

MetricSample DiscreteMetricField::eval_with_gradient(const Vec& x) const {
  const int d = background_.dim();
  const Location loc = locate(x, false);
  const Mat L = blended_log(loc);
  const EigenSolver es(symmetrized(L));
  const Vec& lambda = es.eigenvalues();
  const Mat& Q = es.eigenvectors();
  MetricSample s;
  s.value = Q * lambda.array().exp().matrix().asDiagonal() * Q.transpose();
  for (auto& g : s.gradient) g = Mat::Zero(d, d);
  if (!loc.inside) return s;

  const auto& X = element_coords_[loc.element];
  const Eigen::MatrixXd grads = basis_.gradients(loc.xi);
  const Mat Jinv = (X * grads).inverse();
  // d xi / d x_c = Jinv(:, c); d N_a / d x_c = grads(a, :) Jinv(:, c).
  const Eigen::MatrixXd dN = grads * Jinv;
  const auto el = background_.element(loc.element);
  for (int c = 0; c < d; ++c) {
    Mat dL = Mat::Zero(d, d);
    for (std::size_t a = 0; a < el.size(); ++a) dL += dN(static_cast<Eigen::Index>(a), c) * nodal_log_[el[a]];
    s.gradient[c] = exp_derivative(lambda, Q, dL);
  }
  return s;
}

}  // namespace metra
