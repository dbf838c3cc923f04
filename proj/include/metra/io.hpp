#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metra/mesh.hpp"
#include "metra/metric_field.hpp"
#include "metra/optimizer.hpp"

namespace metra {

using Json = nlohmann::ordered_json;

// Mesh schema:
//   {dim, degree, nodes: [[x, y(, z)], ...], elements: [[i, ...], ...],
//    constraints: [{kind: "free"|"fixed"|"slide", frozen: [bool, ...]}, ...]}
Json mesh_to_json(const HighOrderMesh& mesh);
// Throws ParseError naming the offending field.
HighOrderMesh mesh_from_json(const Json& j);

// Metric schema:
//   {background: <mesh> | "analytic", preset?, params?,
//    nodal_metrics: [[m11, m12, (m13,) m22, (m23, m33)], ...]}
// Upper triangle, row-major.
struct MetricFile {
  std::optional<HighOrderMesh> background;  // empty for analytic files
  std::optional<std::string> preset;        // "constant" | "boundary-layer"
  std::optional<AnalyticMetricSpec> spec;
  int dim = 2;
  std::vector<Mat> nodal_metrics;

  std::unique_ptr<MetricField> make_field() const;
};

Json metric_to_json(const MetricFile& file);
MetricFile metric_from_json(const Json& j);

std::vector<double> upper_triangle(const Mat& M);
Mat from_upper_triangle(const std::vector<double>& values, int dim);

// Applies recognized keys of a config object; unknown keys throw ConfigError.
void apply_optimizer_config(const Json& j, OptimizerConfig& config);
Json optimizer_config_to_json(const OptimizerConfig& config);

std::string to_string(DistortionKind kind);
DistortionKind distortion_kind_from_string(const std::string& name);

// File helpers. Parse failures carry the path and the parser's line/column.
Json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);
HighOrderMesh read_mesh(const std::string& path);
void write_mesh(const std::string& path, const HighOrderMesh& mesh);
MetricFile read_metric(const std::string& path);

// Legacy ASCII VTK unstructured grid. Degree 2 uses quadratic cells; other
// degrees export the vertex simplices. Optional per-cell scalars.
void write_vtk(std::ostream& os, const HighOrderMesh& mesh, const std::string& cell_field = {},
               const std::vector<double>& cell_values = {});

}  // namespace metra
