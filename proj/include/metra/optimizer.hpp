#pragma once

#include <string>
#include <vector>

#include "metra/distortion.hpp"
#include "metra/mesh.hpp"
#include "metra/metric_field.hpp"

namespace metra {

struct OptimizerConfig {
  double rms_tol = 1e-4;   // stop when ||grad|| / sqrt(n) <= rms_tol
  double step_tol = 1e-4;  // stop when the accepted max-norm displacement < step_tol
  int max_newton_iters = 200;
  int max_pcg_iters = 200;
  double pcg_rel_tol = 1e-3;
  int quadrature_n1d = 0;  // 0 selects 3p
  double armijo_c1 = 1e-4;
  DistortionKind objective = DistortionKind::SizeShape;

  void validate() const;
};

// Free coordinates of the mesh: (node, component) pairs whose component is not
// frozen by the node's constraint, as indices into mesh.coordinates().
struct DofMap {
  std::vector<std::size_t> coordinate_index;

  static DofMap from_mesh(const HighOrderMesh& mesh);
  std::size_t size() const { return coordinate_index.size(); }
  std::vector<double> gather(const std::vector<double>& coords) const;
  void scatter(const std::vector<double>& values, std::vector<double>& coords) const;
};

// F(mesh) = sum_E sum_q w_q |det Dphi_eq| N0(xi_q)^2 and its derivatives with
// respect to the free coordinates.
class MeshObjective {
 public:
  MeshObjective(const HighOrderMesh& mesh, const MetricField& field, const OptimizerConfig& config);

  const DofMap& dofs() const { return dofs_; }
  std::vector<double> initial_point() const { return dofs_.gather(mesh_.coordinates()); }

  // +inf when any quadrature point has a non-positive sigma_M.
  double value(const std::vector<double>& free) const;
  // Returns the value; fills grad (free dofs). grad is meaningless if the value is infinite.
  double value_and_gradient(const std::vector<double>& free, std::vector<double>& grad) const;
  // Central finite differences of the analytic gradient, step 1e-5 * bbox / ||v||.
  std::vector<double> hess_vec(const std::vector<double>& free, const std::vector<double>& v) const;
  // Jacobi diagonal by colored forward differences of the gradient.
  std::vector<double> hessian_diagonal(const std::vector<double>& free,
                                       const std::vector<double>& grad) const;

  // Elements whose elemental objective is infinite at the given point.
  std::vector<std::size_t> invalid_elements(const std::vector<double>& free) const;
  HighOrderMesh mesh_at(const std::vector<double>& free) const;

 private:
  std::vector<double> full_coords(const std::vector<double>& free) const;
  double element_value(const std::vector<double>& coords, std::size_t e) const;
  double element_gradient(const std::vector<double>& coords, std::size_t e,
                          Eigen::MatrixXd& local) const;

  const HighOrderMesh& mesh_;
  const MetricField& field_;
  OptimizerConfig config_;
  DofMap dofs_;
  ElementFrame frame_;
  Tabulation tab_;
  double scale_ = 1.0;
  std::vector<std::vector<std::size_t>> colors_;  // node sets sharing no element
};

double objective(const HighOrderMesh& mesh, const MetricField& field, const OptimizerConfig& config);
std::vector<double> gradient(const HighOrderMesh& mesh, const MetricField& field,
                             const OptimizerConfig& config);
std::vector<double> hess_vec(const HighOrderMesh& mesh, const MetricField& field,
                             const OptimizerConfig& config, const std::vector<double>& v);

struct TraceEntry {
  int iter = 0;
  double objective = 0.0;
  double grad_rms = 0.0;
  double step = 0.0;
  double wallclock_ms = 0.0;
};

enum class StopReason { GradientTolerance, StepTolerance, MaxIterations };
std::string to_string(StopReason reason);

struct OptimizeResult {
  HighOrderMesh mesh;
  std::vector<TraceEntry> trace;
  StopReason reason = StopReason::MaxIterations;
};

// Newton with truncated PCG directions and valid-to-valid backtracking.
// Throws InvalidMeshError if the initial objective is infinite.
OptimizeResult optimize(const HighOrderMesh& mesh, const MetricField& field,
                        const OptimizerConfig& config);

struct ValidityReport {
  std::vector<std::size_t> invalid_elements;
  std::size_t samples = 0;
  double min_sigma = 0.0;    // smallest sigma_M over all samples
  double min_quality = 0.0;  // smallest pointwise Q0 over all samples

  bool valid() const { return invalid_elements.empty(); }
};

// Samples sigma_M and Q0 on the lattice with samples_per_edge points per edge
// (3p when 0) plus the default quadrature points.
ValidityReport verify_validity(const HighOrderMesh& mesh, const MetricField& field,
                               int samples_per_edge = 0);

}  // namespace metra
