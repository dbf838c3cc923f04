#include "metra/io.hpp"

#include <fstream>
#include <sstream>

#include "metra/errors.hpp"
#include "metra/simplex_basis.hpp"

namespace metra {

namespace {

std::string field_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

const Json& require(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ParseError(where.empty() ? "expected an object" : where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError("missing field '" + field_path(where, key) + "'");
  return *it;
}

int require_int(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_number_integer()) throw ParseError("field '" + field_path(where, key) + "' must be an integer");
  return v.get<int>();
}

double number_at(const Json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError("field '" + where + "' must be a number");
  return v.get<double>();
}

}  // namespace

std::string to_string(DistortionKind kind) {
  return kind == DistortionKind::SizeShape ? "size-shape" : "shape";
}

DistortionKind distortion_kind_from_string(const std::string& name) {
  if (name == "size-shape") return DistortionKind::SizeShape;
  if (name == "shape") return DistortionKind::ShapeOnly;
  throw ConfigError("unknown objective '" + name + "' (expected size-shape or shape)");
}

Json mesh_to_json(const HighOrderMesh& mesh) {
  const int d = mesh.dim();
  Json j;
  j["dim"] = d;
  j["degree"] = mesh.degree();
  Json nodes = Json::array();
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    Json row = Json::array();
    for (int c = 0; c < d; ++c) row.push_back(mesh.coordinates()[i * d + c]);
    nodes.push_back(std::move(row));
  }
  j["nodes"] = std::move(nodes);
  Json elements = Json::array();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    elements.push_back(Json(std::vector<int>(el.begin(), el.end())));
  }
  j["elements"] = std::move(elements);
  Json constraints = Json::array();
  for (const auto& c : mesh.constraints()) {
    Json cj;
    cj["kind"] = c.kind == ConstraintKind::Free ? "free" : c.kind == ConstraintKind::Fixed ? "fixed" : "slide";
    Json frozen = Json::array();
    for (int k = 0; k < d; ++k) frozen.push_back(c.is_frozen(k));
    cj["frozen"] = std::move(frozen);
    constraints.push_back(std::move(cj));
  }
  j["constraints"] = std::move(constraints);
  return j;
}

HighOrderMesh mesh_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("mesh: expected an object");
  const int d = require_int(j, "dim", "");
  const int p = require_int(j, "degree", "");
  if (d < 2 || d > 3) throw ParseError("field 'dim': must be 2 or 3, got " + std::to_string(d));
  if (p < 1 || p > kMaxDegree) throw ConfigError("unsupported polynomial degree " + std::to_string(p));
  const std::size_t npe = simplex_node_count(d, p);

  const Json& nodes = require(j, "nodes", "");
  if (!nodes.is_array()) throw ParseError("field 'nodes' must be an array");
  std::vector<double> coords;
  coords.reserve(nodes.size() * d);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "nodes[" + std::to_string(i) + "]";
    if (!nodes[i].is_array() || nodes[i].size() != static_cast<std::size_t>(d)) {
      throw ParseError("field '" + where + "': expected " + std::to_string(d) + " coordinates");
    }
    for (int c = 0; c < d; ++c) coords.push_back(number_at(nodes[i][c], where));
  }

  const Json& elements = require(j, "elements", "");
  if (!elements.is_array()) throw ParseError("field 'elements' must be an array");
  std::vector<int> conn;
  conn.reserve(elements.size() * npe);
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const std::string where = "elements[" + std::to_string(e) + "]";
    if (!elements[e].is_array()) throw ParseError("field '" + where + "' must be an array");
    if (elements[e].size() != npe) {
      throw ParseError("element " + std::to_string(e) + " has " + std::to_string(elements[e].size()) +
                       " nodes, expected " + std::to_string(npe) + " for degree " + std::to_string(p));
    }
    for (const auto& v : elements[e]) {
      if (!v.is_number_integer()) throw ParseError("field '" + where + "': node indices must be integers");
      conn.push_back(v.get<int>());
    }
  }

  std::vector<BoundaryConstraint> constraints;
  if (const auto it = j.find("constraints"); it != j.end()) {
    if (!it->is_array() || it->size() != nodes.size()) {
      throw ParseError("field 'constraints' must be an array with one entry per node");
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = "constraints[" + std::to_string(i) + "]";
      const Json& cj = (*it)[i];
      const Json& kind = require(cj, "kind", where);
      if (!kind.is_string()) throw ParseError("field '" + where + ".kind' must be a string");
      const auto name = kind.get<std::string>();
      std::uint8_t mask = 0;
      if (const auto f = cj.find("frozen"); f != cj.end()) {
        if (!f->is_array() || f->size() != static_cast<std::size_t>(d)) {
          throw ParseError("field '" + where + ".frozen' must hold " + std::to_string(d) + " booleans");
        }
        for (int c = 0; c < d; ++c) {
          if (!(*f)[c].is_boolean()) throw ParseError("field '" + where + ".frozen' must hold booleans");
          if ((*f)[c].get<bool>()) mask |= static_cast<std::uint8_t>(1u << c);
        }
      }
      if (name == "free") {
        constraints.push_back(BoundaryConstraint::free());
      } else if (name == "fixed") {
        constraints.push_back(BoundaryConstraint::fixed());
      } else if (name == "slide") {
        const auto c = BoundaryConstraint::from_mask(mask, d);
        if (c.kind != ConstraintKind::AxisSlide) {
          throw ParseError("field '" + where + ".frozen': slide must freeze a proper non-empty subset");
        }
        constraints.push_back(c);
      } else {
        throw ParseError("field '" + where + ".kind': unknown constraint kind '" + name + "'");
      }
    }
  }
  try {
    return HighOrderMesh(d, p, std::move(coords), std::move(conn), std::move(constraints));
  } catch (const MeshIntegrityError& e) {
    throw ParseError(std::string("mesh: ") + e.what());
  }
}

std::vector<double> upper_triangle(const Mat& M) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = r; c < M.cols(); ++c) out.push_back(M(r, c));
  return out;
}

Mat from_upper_triangle(const std::vector<double>& values, int dim) {
  if (values.size() != static_cast<std::size_t>(dim * (dim + 1) / 2)) {
    throw ParseError("metric entry needs " + std::to_string(dim * (dim + 1) / 2) + " values");
  }
  Mat M(dim, dim);
  std::size_t k = 0;
  for (int r = 0; r < dim; ++r)
    for (int c = r; c < dim; ++c) M(r, c) = M(c, r) = values[k++];
  return M;
}

std::unique_ptr<MetricField> MetricFile::make_field() const {
  if (background) {
    return std::make_unique<DiscreteMetricField>(*background, nodal_metrics);
  }
  if (!spec) throw ConfigError("analytic metric file without a preset");
  return make_analytic_field(*spec, dim);
}

Json metric_to_json(const MetricFile& file) {
  Json j;
  j["dim"] = file.background ? file.background->dim() : file.dim;
  if (file.background) {
    j["background"] = mesh_to_json(*file.background);
  } else {
    j["background"] = "analytic";
  }
  if (file.preset) j["preset"] = *file.preset;
  if (file.spec) {
    Json params;
    if (const auto* diag = std::get_if<ConstantDiagSpec>(&*file.spec)) {
      params["h"] = diag->sizes;
    } else {
      const auto& bl = std::get<BoundaryLayerSpec>(*file.spec).params;
      params["h_m"] = bl.h_m;
      params["h_min"] = bl.h_min;
      params["alpha"] = bl.alpha;
      params["deformation"] = bl.deformation;
      params["wave_sign"] = bl.wave_sign;
    }
    j["params"] = std::move(params);
  }
  Json nodal = Json::array();
  for (const auto& M : file.nodal_metrics) nodal.push_back(upper_triangle(M));
  j["nodal_metrics"] = std::move(nodal);
  return j;
}

MetricFile metric_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("metric: expected an object");
  MetricFile file;
  const Json& bg = require(j, "background", "");
  if (bg.is_string()) {
    if (bg.get<std::string>() != "analytic") {
      throw ParseError("field 'background': expected a mesh object or \"analytic\"");
    }
  } else {
    try {
      file.background = mesh_from_json(bg);
    } catch (const ParseError& e) {
      throw ParseError(std::string("background: ") + e.what());
    }
  }
  if (const auto it = j.find("dim"); it != j.end()) {
    if (!it->is_number_integer()) throw ParseError("field 'dim' must be an integer");
    file.dim = it->get<int>();
  }
  if (file.background) file.dim = file.background->dim();
  if (const auto it = j.find("preset"); it != j.end()) {
    if (!it->is_string()) throw ParseError("field 'preset' must be a string");
    file.preset = it->get<std::string>();
    const Json params = j.contains("params") ? j["params"] : Json::object();
    if (!params.is_object()) throw ParseError("field 'params' must be an object");
    if (*file.preset == "constant") {
      const Json& h = require(params, "h", "params");
      ConstantDiagSpec spec;
      if (h.is_number()) {
        spec.sizes.push_back(h.get<double>());
      } else if (h.is_array()) {
        for (std::size_t i = 0; i < h.size(); ++i) spec.sizes.push_back(number_at(h[i], "params.h"));
      } else {
        throw ParseError("field 'params.h' must be a number or an array");
      }
      for (double s : spec.sizes)
        if (!(s > 0.0)) throw ConfigError("constant metric sizes must be positive");
      file.spec = spec;
    } else if (*file.preset == "boundary-layer") {
      BoundaryLayerParams p;
      for (const auto& [key, value] : params.items()) {
        const std::string where = "params." + key;
        if (key == "h_m") p.h_m = number_at(value, where);
        else if (key == "h_min") p.h_min = number_at(value, where);
        else if (key == "alpha") p.alpha = number_at(value, where);
        else if (key == "wave_sign") p.wave_sign = number_at(value, where);
        else if (key == "deformation") {
          if (!value.is_boolean()) throw ParseError("field '" + where + "' must be a boolean");
          p.deformation = value.get<bool>();
        } else {
          throw ParseError("field '" + where + "': unknown parameter");
        }
      }
      file.spec = BoundaryLayerSpec{p};
    } else {
      throw ParseError("field 'preset': unknown preset '" + *file.preset + "'");
    }
  }
  if (const auto it = j.find("nodal_metrics"); it != j.end()) {
    if (!it->is_array()) throw ParseError("field 'nodal_metrics' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = "nodal_metrics[" + std::to_string(i) + "]";
      const Json& row = (*it)[i];
      if (!row.is_array()) throw ParseError("field '" + where + "' must be an array");
      std::vector<double> values;
      for (const auto& v : row) values.push_back(number_at(v, where));
      try {
        file.nodal_metrics.push_back(from_upper_triangle(values, file.dim));
      } catch (const ParseError& e) {
        throw ParseError("field '" + where + "': " + e.what());
      }
    }
  }
  if (file.background) {
    if (file.nodal_metrics.size() != file.background->num_nodes()) {
      throw ParseError("field 'nodal_metrics': expected " + std::to_string(file.background->num_nodes()) +
                       " entries (one per background node), got " +
                       std::to_string(file.nodal_metrics.size()));
    }
  } else if (!file.spec) {
    throw ParseError("analytic metric file needs a 'preset'");
  }
  return file;
}

void apply_optimizer_config(const Json& j, OptimizerConfig& config) {
  if (!j.is_object()) throw ConfigError("optimizer config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto num = [&] {
      if (!value.is_number()) throw ConfigError("config '" + key + "' must be a number");
      return value.get<double>();
    };
    auto integer = [&] {
      if (!value.is_number_integer()) throw ConfigError("config '" + key + "' must be an integer");
      return value.get<int>();
    };
    if (key == "rms_tol") config.rms_tol = num();
    else if (key == "step_tol") config.step_tol = num();
    else if (key == "max_newton_iters") config.max_newton_iters = integer();
    else if (key == "max_pcg_iters") config.max_pcg_iters = integer();
    else if (key == "pcg_rel_tol") config.pcg_rel_tol = num();
    else if (key == "quadrature_n1d") config.quadrature_n1d = integer();
    else if (key == "armijo_c1") config.armijo_c1 = num();
    else if (key == "objective") {
      if (!value.is_string()) throw ConfigError("config 'objective' must be a string");
      config.objective = distortion_kind_from_string(value.get<std::string>());
    } else {
      throw ConfigError("unknown optimizer config key '" + key + "'");
    }
  }
  config.validate();
}

Json optimizer_config_to_json(const OptimizerConfig& config) {
  Json j;
  j["rms_tol"] = config.rms_tol;
  j["step_tol"] = config.step_tol;
  j["max_newton_iters"] = config.max_newton_iters;
  j["max_pcg_iters"] = config.max_pcg_iters;
  j["pcg_rel_tol"] = config.pcg_rel_tol;
  j["quadrature_n1d"] = config.quadrature_n1d;
  j["armijo_c1"] = config.armijo_c1;
  j["objective"] = to_string(config.objective);
  return j;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

HighOrderMesh read_mesh(const std::string& path) {
  try {
    return mesh_from_json(read_json(path));
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ParseError(path + ": " + msg);
  }
}

void write_mesh(const std::string& path, const HighOrderMesh& mesh) {
  write_text(path, mesh_to_json(mesh).dump(1) + "\n");
}

MetricFile read_metric(const std::string& path) {
  try {
    return metric_from_json(read_json(path));
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ParseError(path + ": " + msg);
  }
}

void write_vtk(std::ostream& os, const HighOrderMesh& mesh, const std::string& cell_field,
               const std::vector<double>& cell_values) {
  const int d = mesh.dim();
  const int p = mesh.degree();
  os << "# vtk DataFile Version 3.0\nmetra mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os.precision(17);
  os << "POINTS " << mesh.num_nodes() << " double\n";
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    for (int c = 0; c < 3; ++c) os << (c < d ? mesh.coordinates()[i * d + c] : 0.0) << (c < 2 ? " " : "\n");
  }
  // local index order of each exported cell
  std::vector<int> order;
  int type = 0;
  if (p == 2) {
    order = d == 2 ? std::vector<int>{0, 1, 2, 3, 5, 4} : std::vector<int>{0, 1, 2, 3, 4, 7, 5, 6, 8, 9};
    type = d == 2 ? 22 : 24;
  } else {
    for (int v = 0; v <= d; ++v) order.push_back(v);
    type = d == 2 ? 5 : 10;
  }
  const std::size_t ne = mesh.num_elements();
  os << "CELLS " << ne << " " << ne * (order.size() + 1) << "\n";
  for (std::size_t e = 0; e < ne; ++e) {
    const auto el = mesh.element(e);
    os << order.size();
    for (int k : order) os << " " << el[k];
    os << "\n";
  }
  os << "CELL_TYPES " << ne << "\n";
  for (std::size_t e = 0; e < ne; ++e) os << type << "\n";
  if (!cell_field.empty() && cell_values.size() == ne) {
    os << "CELL_DATA " << ne << "\nSCALARS " << cell_field << " double 1\nLOOKUP_TABLE default\n";
    for (double v : cell_values) os << v << "\n";
  }
}

}  // namespace metra
