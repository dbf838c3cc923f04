#include "metra/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "metra/errors.hpp"
#include "metra/parallel.hpp"
#include "metra/stats.hpp"

namespace metra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * b[i];
  return pairwise_sum(prod);
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// x + t * d
std::vector<double> axpy(const std::vector<double>& x, double t, const std::vector<double>& d) {
  std::vector<double> out(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += t * d[i];
  return out;
}

// Greedy coloring of the node graph where two nodes are adjacent if they
// share an element.
std::vector<std::vector<std::size_t>> color_nodes(const HighOrderMesh& mesh) {
  const std::size_t nn = mesh.num_nodes();
  std::vector<std::set<std::size_t>> adjacent(nn);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    for (int a : el)
      for (int b : el)
        if (a != b) adjacent[a].insert(static_cast<std::size_t>(b));
  }
  std::vector<int> color(nn, -1);
  int ncolors = 0;
  for (std::size_t i = 0; i < nn; ++i) {
    std::set<int> used;
    for (std::size_t j : adjacent[i])
      if (color[j] >= 0) used.insert(color[j]);
    int c = 0;
    while (used.count(c)) ++c;
    color[i] = c;
    ncolors = std::max(ncolors, c + 1);
  }
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(ncolors));
  for (std::size_t i = 0; i < nn; ++i) groups[static_cast<std::size_t>(color[i])].push_back(i);
  return groups;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(rms_tol > 0.0) || !(step_tol > 0.0) || !(pcg_rel_tol > 0.0) || !(armijo_c1 > 0.0) ||
      armijo_c1 >= 1.0) {
    throw ConfigError("optimizer tolerances must be positive (armijo_c1 in (0, 1))");
  }
  if (max_newton_iters < 0 || max_pcg_iters < 1) throw ConfigError("iteration limits out of range");
  if (quadrature_n1d < 0) throw ConfigError("quadrature order must be non-negative");
}

DofMap DofMap::from_mesh(const HighOrderMesh& mesh) {
  DofMap map;
  const int d = mesh.dim();
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    for (int c = 0; c < d; ++c) {
      if (!mesh.constraints()[i].is_frozen(c)) map.coordinate_index.push_back(i * d + c);
    }
  }
  return map;
}

std::vector<double> DofMap::gather(const std::vector<double>& coords) const {
  std::vector<double> out(coordinate_index.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = coords[coordinate_index[k]];
  return out;
}

void DofMap::scatter(const std::vector<double>& values, std::vector<double>& coords) const {
  for (std::size_t k = 0; k < values.size(); ++k) coords[coordinate_index[k]] = values[k];
}

MeshObjective::MeshObjective(const HighOrderMesh& mesh, const MetricField& field,
                             const OptimizerConfig& config)
    : mesh_(mesh),
      field_(field),
      config_(config),
      dofs_(DofMap::from_mesh(mesh)),
      frame_(ElementFrame::make(mesh.dim(), mesh.degree())) {
  config_.validate();
  if (field.dim() != mesh.dim()) throw ConfigError("metric and mesh dimensions differ");
  const int n1d = config_.quadrature_n1d > 0 ? config_.quadrature_n1d : 3 * mesh.degree();
  tab_ = Tabulation::make(frame_.basis, quadrature(mesh.dim(), n1d));
  scale_ = std::max(mesh.bbox_diagonal(), std::numeric_limits<double>::min());
  colors_ = color_nodes(mesh);
}

std::vector<double> MeshObjective::full_coords(const std::vector<double>& free) const {
  std::vector<double> coords = mesh_.coordinates();
  dofs_.scatter(free, coords);
  return coords;
}

HighOrderMesh MeshObjective::mesh_at(const std::vector<double>& free) const {
  HighOrderMesh out = mesh_;
  dofs_.scatter(free, out.coordinates());
  return out;
}

double MeshObjective::element_value(const std::vector<double>& coords, std::size_t e) const {
  const int d = mesh_.dim();
  const auto el = mesh_.element(e);
  Eigen::MatrixXd X(d, static_cast<Eigen::Index>(el.size()));
  for (std::size_t a = 0; a < el.size(); ++a)
    for (int c = 0; c < d; ++c) X(c, static_cast<Eigen::Index>(a)) = coords[el[a] * d + c];
  const double vol = std::abs(frame_.equilateral.det);
  double acc = 0.0;
  for (std::size_t q = 0; q < tab_.size(); ++q) {
    const Mat A = X * tab_.gradients[q] * frame_.equilateral.inverse;
    const Vec x = X * tab_.values.row(static_cast<Eigen::Index>(q)).transpose();
    Mat M;
    try {
      M = field_.eval(x);
    } catch (const OutOfDomainError&) {
      return kInf;  // trial nodes far outside the background mesh
    } catch (const LocationError&) {
      return kInf;
    }
    const double f = pointwise_distortion(A, M, config_.objective);
    if (!std::isfinite(f)) return kInf;
    acc += tab_.weights[q] * vol * f * f;
  }
  return acc;
}

double MeshObjective::element_gradient(const std::vector<double>& coords, std::size_t e,
                                       Eigen::MatrixXd& local) const {
  const int d = mesh_.dim();
  const auto el = mesh_.element(e);
  const auto n = static_cast<Eigen::Index>(el.size());
  Eigen::MatrixXd X(d, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (int c = 0; c < d; ++c) X(c, a) = coords[el[a] * d + c];
  local = Eigen::MatrixXd::Zero(d, n);
  const Mat& Winv = frame_.equilateral.inverse;
  const double vol = std::abs(frame_.equilateral.det);
  double acc = 0.0;
  for (std::size_t q = 0; q < tab_.size(); ++q) {
    const auto& G = tab_.gradients[q];
    const auto N = tab_.values.row(static_cast<Eigen::Index>(q));
    const Mat A = X * G * Winv;
    const Vec x = X * N.transpose();
    MetricSample m;
    try {
      m = field_.eval_with_gradient(x);
    } catch (const OutOfDomainError&) {
      return kInf;
    } catch (const LocationError&) {
      return kInf;
    }
    const auto der = pointwise_distortion_derivatives(A, m.value, config_.objective);
    if (!std::isfinite(der.value)) return kInf;
    const double w = tab_.weights[q] * vol;
    acc += w * der.value * der.value;
    const double coef = 2.0 * w * der.value;
    // Through the Jacobian: dF/dJ = dN0/dA W^{-T}.
    local.noalias() += coef * (der.d_A * Winv.transpose()) * G.transpose();
    // Through the metric evaluated at the moving point.
    for (int c = 0; c < d; ++c) {
      const double dmc = (der.d_M.cwiseProduct(m.gradient[c])).sum();
      if (dmc != 0.0) local.row(c) += coef * dmc * N;
    }
  }
  return acc;
}

double MeshObjective::value(const std::vector<double>& free) const {
  const auto coords = full_coords(free);
  std::vector<double> parts(mesh_.num_elements());
  parallel_for(parts.size(), [&](std::size_t e) { parts[e] = element_value(coords, e); });
  for (double v : parts)
    if (!std::isfinite(v)) return kInf;
  return pairwise_sum(parts);
}

double MeshObjective::value_and_gradient(const std::vector<double>& free,
                                         std::vector<double>& grad) const {
  const int d = mesh_.dim();
  const auto coords = full_coords(free);
  const std::size_t ne = mesh_.num_elements();
  std::vector<double> parts(ne);
  std::vector<Eigen::MatrixXd> locals(ne);
  parallel_for(ne, [&](std::size_t e) { parts[e] = element_gradient(coords, e, locals[e]); });
  grad.assign(dofs_.size(), 0.0);
  for (double v : parts)
    if (!std::isfinite(v)) return kInf;
  std::vector<double> full(coords.size(), 0.0);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto el = mesh_.element(e);
    for (std::size_t a = 0; a < el.size(); ++a)
      for (int c = 0; c < d; ++c) full[el[a] * d + c] += locals[e](c, static_cast<Eigen::Index>(a));
  }
  grad = dofs_.gather(full);
  return pairwise_sum(parts);
}

std::vector<double> MeshObjective::hess_vec(const std::vector<double>& free,
                                            const std::vector<double>& v) const {
  const double vn = norm2(v);
  std::vector<double> out(v.size(), 0.0);
  if (vn == 0.0) return out;
  const double eps = 1e-5 * scale_ / vn;
  std::vector<double> gp, gm;
  const double fp = value_and_gradient(axpy(free, eps, v), gp);
  const double fm = value_and_gradient(axpy(free, -eps, v), gm);
  if (std::isfinite(fp) && std::isfinite(fm)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * eps);
    return out;
  }
  // One-sided fallback next to the validity boundary.
  std::vector<double> g0;
  value_and_gradient(free, g0);
  if (std::isfinite(fp)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - g0[i]) / eps;
  } else if (std::isfinite(fm)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (g0[i] - gm[i]) / eps;
  }
  return out;
}

std::vector<double> MeshObjective::hessian_diagonal(const std::vector<double>& free,
                                                    const std::vector<double>& grad) const {
  const int d = mesh_.dim();
  std::vector<double> diag(dofs_.size(), 0.0);
  // dof index of each (node, component), or -1 when frozen
  std::vector<long> dof_of(mesh_.num_nodes() * static_cast<std::size_t>(d), -1);
  for (std::size_t k = 0; k < dofs_.size(); ++k) dof_of[dofs_.coordinate_index[k]] = static_cast<long>(k);
  const double h = 1e-6 * scale_;
  for (const auto& group : colors_) {
    for (int c = 0; c < d; ++c) {
      std::vector<std::size_t> touched;
      std::vector<double> trial = free;
      for (std::size_t node : group) {
        const long k = dof_of[node * d + c];
        if (k < 0) continue;
        touched.push_back(static_cast<std::size_t>(k));
        trial[static_cast<std::size_t>(k)] += h;
      }
      if (touched.empty()) continue;
      std::vector<double> g;
      const double f = value_and_gradient(trial, g);
      for (std::size_t k : touched) diag[k] = std::isfinite(f) ? (g[k] - grad[k]) / h : 0.0;
    }
  }
  return diag;
}

std::vector<std::size_t> MeshObjective::invalid_elements(const std::vector<double>& free) const {
  const auto coords = full_coords(free);
  std::vector<double> parts(mesh_.num_elements());
  parallel_for(parts.size(), [&](std::size_t e) { parts[e] = element_value(coords, e); });
  std::vector<std::size_t> bad;
  for (std::size_t e = 0; e < parts.size(); ++e)
    if (!std::isfinite(parts[e])) bad.push_back(e);
  return bad;
}

double objective(const HighOrderMesh& mesh, const MetricField& field, const OptimizerConfig& config) {
  const MeshObjective obj(mesh, field, config);
  return obj.value(obj.initial_point());
}

std::vector<double> gradient(const HighOrderMesh& mesh, const MetricField& field,
                             const OptimizerConfig& config) {
  const MeshObjective obj(mesh, field, config);
  std::vector<double> g;
  if (!std::isfinite(obj.value_and_gradient(obj.initial_point(), g))) {
    throw InvalidMeshError("gradient requested at an invalid mesh");
  }
  return g;
}

std::vector<double> hess_vec(const HighOrderMesh& mesh, const MetricField& field,
                             const OptimizerConfig& config, const std::vector<double>& v) {
  const MeshObjective obj(mesh, field, config);
  if (v.size() != obj.dofs().size()) throw ConfigError("vector length differs from the dof count");
  return obj.hess_vec(obj.initial_point(), v);
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::GradientTolerance:
      return "gradient_tolerance";
    case StopReason::StepTolerance:
      return "step_tolerance";
    default:
      return "max_iterations";
  }
}

OptimizeResult optimize(const HighOrderMesh& mesh, const MetricField& field,
                        const OptimizerConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  const MeshObjective obj(mesh, field, config);
  const std::size_t n = obj.dofs().size();
  std::vector<double> x = obj.initial_point();
  std::vector<double> g;
  double f = obj.value_and_gradient(x, g);
  if (!std::isfinite(f)) {
    const auto bad = obj.invalid_elements(x);
    std::string list;
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) list += (i ? ", " : "") + std::to_string(bad[i]);
    if (bad.size() > 20) list += ", ...";
    throw InvalidMeshError("initial mesh is not numerically valid; invalid elements: " + list);
  }

  OptimizeResult result;
  auto rms = [&](const std::vector<double>& v) {
    return n == 0 ? 0.0 : norm2(v) / std::sqrt(static_cast<double>(n));
  };
  result.trace.push_back({0, f, rms(g), 0.0, elapsed_ms()});
  result.reason = StopReason::MaxIterations;

  for (int it = 1; it <= config.max_newton_iters + 1; ++it) {
    if (n == 0 || rms(g) <= config.rms_tol) {
      result.reason = StopReason::GradientTolerance;
      break;
    }
    if (it > config.max_newton_iters) break;

    std::vector<double> diag = obj.hessian_diagonal(x, g);
    for (double& v : diag) v = v > 0.0 ? v : 1.0;
    auto precondition = [&](const std::vector<double>& r) {
      std::vector<double> z(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag[i];
      return z;
    };

    // Truncated PCG on H p = -g.
    std::vector<double> p(n, 0.0);
    std::vector<double> r(g.size());
    for (std::size_t i = 0; i < n; ++i) r[i] = -g[i];
    std::vector<double> z = precondition(r);
    std::vector<double> dir = z;
    double rz = dot(r, z);
    const double gnorm = norm2(g);
    for (int k = 0; k < config.max_pcg_iters; ++k) {
      const auto Hd = obj.hess_vec(x, dir);
      const double curvature = dot(dir, Hd);
      if (!(curvature > 0.0)) {
        if (k == 0) p = dir;
        break;
      }
      const double a = rz / curvature;
      for (std::size_t i = 0; i < n; ++i) {
        p[i] += a * dir[i];
        r[i] -= a * Hd[i];
      }
      if (norm2(r) <= config.pcg_rel_tol * gnorm) break;
      z = precondition(r);
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) dir[i] = z[i] + beta * dir[i];
    }
    double slope = dot(g, p);
    if (!(slope < 0.0)) {
      p = precondition(g);
      for (double& v : p) v = -v;
      slope = dot(g, p);
    }

    // Valid-to-valid backtracking with sufficient decrease.
    const double pmax = norm_inf(p);
    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> trial;
    double f_trial = kInf;
    while (alpha * pmax >= config.step_tol) {
      trial = axpy(x, alpha, p);
      f_trial = obj.value(trial);
      if (std::isfinite(f_trial) && f_trial <= f + config.armijo_c1 * alpha * slope && f_trial < f) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      result.reason = StopReason::StepTolerance;
      break;
    }
    x = std::move(trial);
    f = obj.value_and_gradient(x, g);
    const double step = alpha * pmax;
    result.trace.push_back({it, f, rms(g), step, elapsed_ms()});
    if (step < config.step_tol) {
      result.reason = StopReason::StepTolerance;
      break;
    }
  }
  result.mesh = obj.mesh_at(x);
  return result;
}

ValidityReport verify_validity(const HighOrderMesh& mesh, const MetricField& field,
                               int samples_per_edge) {
  const int m = samples_per_edge > 0 ? samples_per_edge : 3 * mesh.degree();
  const auto frame = ElementFrame::make(mesh.dim(), mesh.degree());
  std::vector<Vec> points = lattice_points(mesh.dim(), m);
  for (const auto& q : default_rule(mesh).points) points.push_back(q);
  const auto tab = Tabulation::make(frame.basis, points);

  const std::size_t ne = mesh.num_elements();
  std::vector<double> min_sigma(ne), min_quality(ne);
  parallel_for(ne, [&](std::size_t e) {
    const auto samples = element_samples(mesh, e, field, frame, tab, DistortionKind::SizeShape);
    double s = kInf, qmin = kInf;
    for (const auto& smp : samples) {
      s = std::min(s, smp.sigma);
      qmin = std::min(qmin, smp.quality);
    }
    min_sigma[e] = s;
    min_quality[e] = qmin;
  });
  ValidityReport report;
  report.samples = ne * tab.size();
  report.min_sigma = kInf;
  report.min_quality = kInf;
  for (std::size_t e = 0; e < ne; ++e) {
    if (!(min_sigma[e] > 0.0)) report.invalid_elements.push_back(e);
    report.min_sigma = std::min(report.min_sigma, min_sigma[e]);
    report.min_quality = std::min(report.min_quality, min_quality[e]);
  }
  if (ne == 0) report.min_sigma = report.min_quality = 0.0;
  return report;
}

}  // namespace metra
