#pragma once

#include <cstddef>
#include <vector>

#include "metra/linalg.hpp"
#include "metra/mesh.hpp"
#include "metra/metric_field.hpp"
#include "metra/simplex_basis.hpp"
#include "metra/stats.hpp"

namespace metra {

enum class DistortionKind { SizeShape, ShapeOnly };

// Metric-aware Frobenius norm S_M = sqrt(tr(A^T M A)) and signed determinant
// sigma_M = det(A) sqrt(det M), where A = Dphi_P Dphi_eq^{-1}.
struct FrobeniusDet {
  double frobenius = 0.0;
  double det = 0.0;
};
FrobeniusDet frobenius_and_det_M(const Mat& A, const Mat& M);

// (sigma + |sigma|) / 2
inline double regularize_det(double sigma) { return 0.5 * (sigma + std::abs(sigma)); }

// (1/d) S^2 / sigma0^(2/d); +inf when sigma0 == 0.
double shape_distortion(double frobenius, double sigma0, int d);
// ((sigma0 + 1/sigma0) / 2)^(2/d); +inf when sigma0 == 0.
double size_distortion(double sigma0, int d);
// max(sigma, 1/sigma)^(2/d), the non-smooth size measure size_distortion mimics.
double size_reference(double sigma, int d);

// Regularized pointwise distortion N0(A, M) in [1, inf].
double pointwise_distortion(const Mat& A, const Mat& M, DistortionKind kind = DistortionKind::SizeShape);

// N0 together with dN0/dA and dN0/dM. Only meaningful where N0 is finite.
struct DistortionDerivatives {
  double value = 0.0;
  Mat d_A;
  Mat d_M;
};
DistortionDerivatives pointwise_distortion_derivatives(const Mat& A, const Mat& M,
                                                       DistortionKind kind);

// Reference data shared by every element of a mesh of given (d, p).
struct ElementFrame {
  int dim = 0;
  int degree = 0;
  LagrangeBasis basis;
  EquilateralFrame equilateral;

  static ElementFrame make(int dim, int degree);
};

// Default distortion quadrature: 3p points per direction.
QuadratureRule default_rule(const HighOrderMesh& mesh);

struct PointDistortion {
  double distortion = 1.0;  // N0
  double quality = 1.0;     // Q0 = 1 / N0
  double sigma = 1.0;       // signed sigma_M
};

PointDistortion sizeshape_pointwise(const HighOrderMesh& mesh, std::size_t element,
                                    const MetricField& field, const Vec& xi,
                                    DistortionKind kind = DistortionKind::SizeShape);

// Same, at tabulated master points of one element.
std::vector<PointDistortion> element_samples(const HighOrderMesh& mesh, std::size_t element,
                                             const MetricField& field, const ElementFrame& frame,
                                             const Tabulation& tab, DistortionKind kind);

struct ElementDistortion {
  double eta0 = 1.0;
  double q0 = 1.0;
};

// eta0 = sum_q w_q N0(xi_q) / sum_q w_q, q0 = 1/eta0 (0 if any sample is infinite).
ElementDistortion elemental_distortion(const HighOrderMesh& mesh, std::size_t element,
                                       const MetricField& field, const QuadratureRule& rule,
                                       DistortionKind kind = DistortionKind::SizeShape);

struct DistortionReport {
  std::vector<double> eta0;
  std::vector<double> q0;
  std::vector<std::vector<double>> pointwise_quality;  // per element, per quadrature point
  std::vector<std::size_t> invalid_elements;
  Stats stats;  // over q0
};

DistortionReport mesh_report(const HighOrderMesh& mesh, const MetricField& field,
                             const QuadratureRule& rule,
                             DistortionKind kind = DistortionKind::SizeShape);

}  // namespace metra
