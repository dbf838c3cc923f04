#pragma once

#include <vector>

#include "metra/linalg.hpp"
#include "metra/mesh.hpp"
#include "metra/metric_field.hpp"
#include "metra/simplex_basis.hpp"
#include "metra/stats.hpp"

namespace metra {

inline constexpr int kDefaultHistogramBins = 64;

// Pointwise metric-aware normalized density of a k-entity:
//   rho_M = sqrt(det(J^T M J) / det(E^T E))
// with J the d x k entity Jacobian and E the k-dim equilateral frame.
// Singular entity Jacobians give 0.
double density(const HighOrderMesh& mesh, const EntityRef& entity, const MetricField& field,
               const Vec& xi);

// Kernel form for pre-tabulated data: coords is d x n, grads is n x k.
double density_kernel(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& grads,
                      const Mat& M, const EquilateralFrame& frame);

// V_M = (1 / |E^M|) int_{E^M} rho_M by quadrature.
double entity_measure(const HighOrderMesh& mesh, const EntityRef& entity,
                      const MetricField& field, const QuadratureRule& rule);

struct MeasureHistogram {
  int dim = 0;
  std::vector<double> bin_edges;  // bins + 1 values, uniform in log2(rho)
  std::vector<double> mass;       // quadrature-weighted pointwise rho samples
  double degenerate_mass = 0.0;   // samples with rho == 0 (not binned)
  std::vector<double> measures;   // element-wise V_M per entity
  Stats stats;                    // over measures
};

// One histogram per entity dimension k = 1..d, entity quadrature 3p per direction.
std::vector<MeasureHistogram> mesh_measures(const HighOrderMesh& mesh, const MetricField& field,
                                            int bins = kDefaultHistogramBins);

}  // namespace metra
