#include "metra/distortion.hpp"

#include <cmath>
#include <limits>

#include "metra/parallel.hpp"

namespace metra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

FrobeniusDet frobenius_and_det_M(const Mat& A, const Mat& M) {
  FrobeniusDet out;
  out.frobenius = std::sqrt((A.transpose() * M * A).trace());
  out.det = A.determinant() * std::sqrt(M.determinant());
  return out;
}

double shape_distortion(double frobenius, double sigma0, int d) {
  if (!(sigma0 > 0.0)) return kInf;
  return frobenius * frobenius / (d * std::pow(sigma0, 2.0 / d));
}

double size_distortion(double sigma0, int d) {
  if (!(sigma0 > 0.0)) return kInf;
  return std::pow(0.5 * (sigma0 + 1.0 / sigma0), 2.0 / d);
}

double size_reference(double sigma, int d) {
  return std::pow(std::max(sigma, 1.0 / sigma), 2.0 / d);
}

double pointwise_distortion(const Mat& A, const Mat& M, DistortionKind kind) {
  const int d = static_cast<int>(A.rows());
  const auto [S, sigma] = frobenius_and_det_M(A, M);
  const double sigma0 = regularize_det(sigma);
  const double shape = shape_distortion(S, sigma0, d);
  if (kind == DistortionKind::ShapeOnly || !std::isfinite(shape)) return shape;
  return shape * size_distortion(sigma0, d);
}

DistortionDerivatives pointwise_distortion_derivatives(const Mat& A, const Mat& M,
                                                       DistortionKind kind) {
  const int d = static_cast<int>(A.rows());
  DistortionDerivatives out;
  out.value = pointwise_distortion(A, M, kind);
  if (!std::isfinite(out.value)) {
    out.d_A = Mat::Zero(d, d);
    out.d_M = Mat::Zero(d, d);
    return out;
  }
  const double S2 = (A.transpose() * M * A).trace();
  const double sigma = A.determinant() * std::sqrt(M.determinant());
  // d log N0 = dS^2 / S^2 + c dsigma
  const double c = kind == DistortionKind::SizeShape
                       ? -4.0 / (d * sigma * (sigma * sigma + 1.0))
                       : -2.0 / (d * sigma);
  const double f = out.value;
  out.d_A = f * (2.0 * M * A / S2 + c * sigma * A.inverse().transpose());
  out.d_M = f * (A * A.transpose() / S2 + 0.5 * c * sigma * M.inverse());
  return out;
}

ElementFrame ElementFrame::make(int dim, int degree) {
  return {dim, degree, LagrangeBasis::equispaced(dim, degree), equilateral_jacobian(dim)};
}

QuadratureRule default_rule(const HighOrderMesh& mesh) {
  return quadrature(mesh.dim(), 3 * mesh.degree());
}

PointDistortion sizeshape_pointwise(const HighOrderMesh& mesh, std::size_t element,
                                    const MetricField& field, const Vec& xi,
                                    DistortionKind kind) {
  const auto frame = ElementFrame::make(mesh.dim(), mesh.degree());
  const auto tab = Tabulation::make(frame.basis, std::vector<Vec>{xi});
  return element_samples(mesh, element, field, frame, tab, kind).front();
}

std::vector<PointDistortion> element_samples(const HighOrderMesh& mesh, std::size_t element,
                                             const MetricField& field, const ElementFrame& frame,
                                             const Tabulation& tab, DistortionKind kind) {
  const Eigen::MatrixXd X = mesh.element_coords(element);
  std::vector<PointDistortion> out(tab.size());
  for (std::size_t q = 0; q < tab.size(); ++q) {
    const Mat J = X * tab.gradients[q];
    const Vec x = X * tab.values.row(static_cast<Eigen::Index>(q)).transpose();
    const Mat A = J * frame.equilateral.inverse;
    const Mat M = field.eval(x);
    auto& s = out[q];
    s.sigma = frobenius_and_det_M(A, M).det;
    s.distortion = pointwise_distortion(A, M, kind);
    s.quality = std::isfinite(s.distortion) ? 1.0 / s.distortion : 0.0;
  }
  return out;
}

ElementDistortion elemental_distortion(const HighOrderMesh& mesh, std::size_t element,
                                       const MetricField& field, const QuadratureRule& rule,
                                       DistortionKind kind) {
  const auto frame = ElementFrame::make(mesh.dim(), mesh.degree());
  const auto tab = Tabulation::make(frame.basis, rule);
  const auto samples = element_samples(mesh, element, field, frame, tab, kind);
  double num = 0.0, den = 0.0;
  for (std::size_t q = 0; q < samples.size(); ++q) {
    num += tab.weights[q] * samples[q].distortion;
    den += tab.weights[q];
  }
  ElementDistortion out;
  out.eta0 = num / den;
  out.q0 = std::isfinite(out.eta0) ? 1.0 / out.eta0 : 0.0;
  return out;
}

DistortionReport mesh_report(const HighOrderMesh& mesh, const MetricField& field,
                             const QuadratureRule& rule, DistortionKind kind) {
  const auto frame = ElementFrame::make(mesh.dim(), mesh.degree());
  const auto tab = Tabulation::make(frame.basis, rule);
  double weight_sum = 0.0;
  for (double w : tab.weights) weight_sum += w;

  const std::size_t ne = mesh.num_elements();
  DistortionReport report;
  report.eta0.assign(ne, 0.0);
  report.q0.assign(ne, 0.0);
  report.pointwise_quality.assign(ne, {});
  parallel_for(ne, [&](std::size_t e) {
    const auto samples = element_samples(mesh, e, field, frame, tab, kind);
    double num = 0.0;
    std::vector<double> quality(samples.size());
    for (std::size_t q = 0; q < samples.size(); ++q) {
      num += tab.weights[q] * samples[q].distortion;
      quality[q] = samples[q].quality;
    }
    report.eta0[e] = num / weight_sum;
    report.q0[e] = std::isfinite(report.eta0[e]) ? 1.0 / report.eta0[e] : 0.0;
    report.pointwise_quality[e] = std::move(quality);
  });
  for (std::size_t e = 0; e < ne; ++e) {
    if (!std::isfinite(report.eta0[e])) report.invalid_elements.push_back(e);
  }
  report.stats = compute_stats(report.q0);
  return report;
}

}  // namespace metra
