#include "metra/riemannian_measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metra/parallel.hpp"

namespace metra {

namespace {

Eigen::MatrixXd entity_coords(const HighOrderMesh& mesh, const EntityRef& entity) {
  Eigen::MatrixXd X(mesh.dim(), static_cast<Eigen::Index>(entity.nodes.size()));
  for (std::size_t a = 0; a < entity.nodes.size(); ++a) {
    X.col(static_cast<Eigen::Index>(a)) = mesh.node(static_cast<std::size_t>(entity.nodes[a]));
  }
  return X;
}

}  // namespace

double density_kernel(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& grads, const Mat& M,
                      const EquilateralFrame& frame) {
  const Eigen::MatrixXd J = coords * grads;
  const double num = (J.transpose() * M * J).determinant();
  const double den = (frame.jacobian.transpose() * frame.jacobian).determinant();
  if (!(num > 0.0)) return 0.0;
  return std::sqrt(num / den);
}

double density(const HighOrderMesh& mesh, const EntityRef& entity, const MetricField& field,
               const Vec& xi) {
  const auto basis = LagrangeBasis::equispaced(entity.dim, mesh.degree());
  const auto X = entity_coords(mesh, entity);
  const Vec x = X * basis.values(xi);
  return density_kernel(X, basis.gradients(xi), field.eval(x), equilateral_jacobian(entity.dim));
}

double entity_measure(const HighOrderMesh& mesh, const EntityRef& entity,
                      const MetricField& field, const QuadratureRule& rule) {
  const auto basis = LagrangeBasis::equispaced(entity.dim, mesh.degree());
  const auto frame = equilateral_jacobian(entity.dim);
  const auto tab = Tabulation::make(basis, rule);
  const auto X = entity_coords(mesh, entity);
  double acc = 0.0;
  for (std::size_t q = 0; q < tab.size(); ++q) {
    const Vec x = X * tab.values.row(static_cast<Eigen::Index>(q)).transpose();
    acc += tab.weights[q] * density_kernel(X, tab.gradients[q], field.eval(x), frame);
  }
  return acc / master_volume(entity.dim);
}

std::vector<MeasureHistogram> mesh_measures(const HighOrderMesh& mesh, const MetricField& field,
                                            int bins) {
  bins = std::max(bins, 1);
  std::vector<MeasureHistogram> out;
  for (int k = 1; k <= mesh.dim(); ++k) {
    const auto entities = sub_entities(mesh, k);
    const auto basis = LagrangeBasis::equispaced(k, mesh.degree());
    const auto frame = equilateral_jacobian(k);
    const auto rule = quadrature(k, 3 * mesh.degree());
    const auto tab = Tabulation::make(basis, rule);

    MeasureHistogram h;
    h.dim = k;
    h.measures.assign(entities.size(), 0.0);
    std::vector<std::vector<double>> samples(entities.size());
    parallel_for(entities.size(), [&](std::size_t i) {
      const auto X = entity_coords(mesh, entities[i]);
      std::vector<double> rho(tab.size());
      double acc = 0.0;
      for (std::size_t q = 0; q < tab.size(); ++q) {
        const Vec x = X * tab.values.row(static_cast<Eigen::Index>(q)).transpose();
        rho[q] = density_kernel(X, tab.gradients[q], field.eval(x), frame);
        acc += tab.weights[q] * rho[q];
      }
      h.measures[i] = acc / master_volume(k);
      samples[i] = std::move(rho);
    });
    h.stats = compute_stats(h.measures);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& rho : samples) {
      for (double r : rho) {
        if (r > 0.0) {
          lo = std::min(lo, std::log2(r));
          hi = std::max(hi, std::log2(r));
        }
      }
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double width = (hi - lo) / bins;
    h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) h.bin_edges[b] = std::exp2(lo + b * width);
    h.mass.assign(static_cast<std::size_t>(bins), 0.0);
    for (const auto& rho : samples) {
      for (std::size_t q = 0; q < rho.size(); ++q) {
        if (!(rho[q] > 0.0)) {
          h.degenerate_mass += tab.weights[q];
          continue;
        }
        const int b = std::clamp(static_cast<int>(std::floor((std::log2(rho[q]) - lo) / width)), 0,
                                 bins - 1);
        h.mass[static_cast<std::size_t>(b)] += tab.weights[q];
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace metra
