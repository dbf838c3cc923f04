#pragma once

#include <array>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "metra/linalg.hpp"
#include "metra/mesh.hpp"
#include "metra/simplex_basis.hpp"

namespace metra {

// Eigenvalue floor applied before taking logarithms.
inline constexpr double kEigenFloor = 1e-300;

// Throws SingularMetricError unless M is symmetric (1e-12 relative) with
// strictly positive eigenvalues.
void validate_metric(const Mat& M);

Mat metric_log(const Mat& M);
Mat metric_exp(const Mat& S);
// Frechet derivative of the matrix exponential at symmetric S along symmetric E.
Mat metric_exp_derivative(const Mat& S, const Mat& E);
// Upper-triangular F with F^T F = M.
Mat factorize(const Mat& M);

// Metric value and its spatial derivatives dM/dx_c, c < d.
struct MetricSample {
  Mat value;
  std::array<Mat, 3> gradient;
};

class MetricField {
 public:
  virtual ~MetricField() = default;
  virtual int dim() const = 0;
  virtual Mat eval(const Vec& x) const = 0;
  virtual MetricSample eval_with_gradient(const Vec& x) const = 0;
};

class ConstantMetric final : public MetricField {
 public:
  explicit ConstantMetric(Mat M);
  // diag(1/h_0^2, ..., 1/h_{d-1}^2).
  static ConstantMetric from_sizes(const std::vector<double>& sizes);

  int dim() const override { return static_cast<int>(M_.rows()); }
  Mat eval(const Vec&) const override { return M_; }
  MetricSample eval_with_gradient(const Vec& x) const override;

 private:
  Mat M_;
};

// M = (1/h_m^2) Dphi^T diag(1, 1/h(phi_2)^2) Dphi with h(s) = h_min + alpha |s| and
// phi(x, y) = (x, (10 y + wave_sign cos 2 pi x) / sqrt(100 + 4 pi^2)), or the
// identity map when deformation is off.
struct BoundaryLayerParams {
  double h_m = 0.25;
  double h_min = 0.01;
  double alpha = 2.0;
  bool deformation = true;
  double wave_sign = -1.0;
};

class BoundaryLayerMetric final : public MetricField {
 public:
  explicit BoundaryLayerMetric(BoundaryLayerParams params);

  int dim() const override { return 2; }
  Mat eval(const Vec& x) const override;
  MetricSample eval_with_gradient(const Vec& x) const override;
  const BoundaryLayerParams& params() const { return params_; }

 private:
  BoundaryLayerParams params_;
};

// Analytic presets, as stored in metric files.
struct ConstantDiagSpec {
  std::vector<double> sizes;
};
struct BoundaryLayerSpec {
  BoundaryLayerParams params;
};
using AnalyticMetricSpec = std::variant<ConstantDiagSpec, BoundaryLayerSpec>;

std::unique_ptr<MetricField> make_analytic_field(const AnalyticMetricSpec& spec, int dim);

// Nodal metrics on a background mesh, blended in log space:
//   M(x) = exp(sum_i N_i(xi(x)) log M_i)
// where xi(x) inverts the background element containing x.
class DiscreteMetricField final : public MetricField {
 public:
  DiscreteMetricField(HighOrderMesh background, std::vector<Mat> nodal_metrics);

  // Samples an analytic field at the background nodes.
  static DiscreteMetricField sample(const MetricField& field, HighOrderMesh background);

  int dim() const override { return background_.dim(); }
  // Points farther than 1e-8 from the background throw OutOfDomainError.
  Mat interpolate(const Vec& x) const;
  // Like interpolate, but points outside the background are evaluated at the
  // nearest background point.
  Mat eval(const Vec& x) const override;
  MetricSample eval_with_gradient(const Vec& x) const override;

  const HighOrderMesh& background() const { return background_; }
  const std::vector<Mat>& nodal_metrics() const { return nodal_; }

  struct Location {
    std::size_t element = 0;
    Vec xi;
    bool inside = true;
  };
  // Strict location (throws outside tolerance) or nearest-point fallback.
  Location locate(const Vec& x, bool strict) const;

 private:
  bool invert(std::size_t e, const Vec& x, Vec& xi) const;
  Mat blended_log(const Location& loc) const;

  HighOrderMesh background_;
  std::vector<Mat> nodal_;
  std::vector<Mat> nodal_log_;
  LagrangeBasis basis_;
  std::vector<Eigen::MatrixXd> element_coords_;
  std::vector<std::pair<Vec, Vec>> element_boxes_;
  std::vector<char> affine_;
  std::vector<Mat> affine_inverse_;
  Vec grid_origin_;
  double grid_cell_ = 1.0;
  std::array<int, 3> grid_cells_{1, 1, 1};
  std::vector<std::vector<std::size_t>> grid_;
};

}  // namespace metra
