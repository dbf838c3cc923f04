#include "metra/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "metra/distortion.hpp"
#include "metra/error_metrics.hpp"
#include "metra/errors.hpp"
#include "metra/io.hpp"
#include "metra/mesh.hpp"
#include "metra/metric_field.hpp"
#include "metra/optimizer.hpp"
#include "metra/parallel.hpp"
#include "metra/riemannian_measure.hpp"

namespace metra {

namespace {

using Clock = std::chrono::steady_clock;

struct GlobalOptions {
  std::optional<int> threads;
  bool reproducible = false;
};

// JSON has no infinity; non-finite values become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json stats_json(const Stats& s) {
  Json j;
  j["min"] = number(s.min);
  j["max"] = number(s.max);
  j["mean"] = number(s.mean);
  j["std_dev"] = number(s.std_dev);
  j["count"] = s.count;
  return j;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  // shortest round-trip form, as in the JSON files
  return Json(v).dump();
}

class Manifest {
 public:
  Manifest(std::string command, const GlobalOptions& global)
      : command_(std::move(command)), reproducible_(global.reproducible), start_(Clock::now()) {}

  void input(const std::string& key, const std::string& path) { inputs_[key] = path; }
  Json& config() { return config_; }
  bool reproducible() const { return reproducible_; }
  double elapsed_ms() const {
    if (reproducible_) return 0.0;
    return std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
  }

  Json json() const {
    Json j;
    j["tool"] = "metra";
    j["version"] = kVersion;
    j["command"] = command_;
    j["inputs"] = inputs_.empty() ? Json::object() : inputs_;
    j["config"] = config_.empty() ? Json::object() : config_;
    j["wallclock_ms"] = elapsed_ms();
    return j;
  }
  // Single comment line heading CSV outputs.
  std::string csv_header() const { return "# manifest: " + json().dump() + "\n"; }

 private:
  std::string command_;
  bool reproducible_;
  Clock::time_point start_;
  Json inputs_;
  Json config_;
};

void write_report(const std::string& path, Json report, const Manifest& manifest) {
  Json j;
  j["manifest"] = manifest.json();
  for (auto& [k, v] : report.items()) j[k] = v;
  write_text(path, j.dump(2) + "\n");
}

void export_vtk(const std::string& path, const HighOrderMesh& mesh, const std::vector<double>& q0 = {}) {
  std::ostringstream os;
  write_vtk(os, mesh, q0.empty() ? "" : "q0", q0);
  write_text(path, os.str());
}

Json quality_json(const DistortionReport& r) {
  Json j;
  j["stats"] = stats_json(r.stats);
  j["invalid_elements"] = r.invalid_elements;
  Json per = Json::array();
  for (std::size_t e = 0; e < r.q0.size(); ++e) {
    Json row;
    row["eta0"] = number(r.eta0[e]);
    row["q0"] = r.q0[e];
    per.push_back(std::move(row));
  }
  j["per_element"] = std::move(per);
  return j;
}

const char* entity_name(int k) { return k == 1 ? "length" : k == 2 ? "area" : "volume"; }

Json measures_json(const std::vector<MeasureHistogram>& hists) {
  Json j = Json::array();
  for (const auto& h : hists) {
    Json e;
    e["dim"] = h.dim;
    e["name"] = entity_name(h.dim);
    e["stats"] = stats_json(h.stats);
    e["degenerate_mass"] = h.degenerate_mass;
    j.push_back(std::move(e));
  }
  return j;
}

void write_histograms(const std::string& prefix, const std::vector<MeasureHistogram>& hists,
                      const Manifest& manifest) {
  for (const auto& h : hists) {
    std::ostringstream os;
    os << manifest.csv_header() << "bin_left,bin_right,mass\n";
    for (std::size_t b = 0; b < h.mass.size(); ++b) {
      os << csv_number(h.bin_edges[b]) << "," << csv_number(h.bin_edges[b + 1]) << "," << csv_number(h.mass[b])
         << "\n";
    }
    write_text(prefix + "_" + entity_name(h.dim) + ".csv", os.str());
  }
}

struct FieldHandle {
  MetricFile file;
  std::unique_ptr<MetricField> field;
};

FieldHandle load_field(const std::string& path, int mesh_dim) {
  FieldHandle h;
  h.file = read_metric(path);
  if (!h.file.background && h.file.dim != mesh_dim) {
    // analytic files carry a nominal dimension; follow the mesh
    h.file.dim = mesh_dim;
  }
  h.field = h.file.make_field();
  if (h.field->dim() != mesh_dim) {
    throw ConfigError("metric dimension " + std::to_string(h.field->dim()) + " differs from mesh dimension " +
                      std::to_string(mesh_dim));
  }
  return h;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metric-aware validation and optimization of high-order simplicial meshes", "metra"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  int threads_flag = -1;
  app.add_option("--threads", threads_flag, "worker threads (default: METRA_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--reproducible", global.reproducible, "write zero wallclock times so reruns are byte-identical");
  app.set_version_flag("--version", std::string("metra ") + kVersion);

  // gen-mesh
  auto* gen_mesh = app.add_subcommand("gen-mesh", "structured box mesh");
  std::vector<double> domain{-0.5, 0.5};
  int dim = 2, degree = 1, n = 1;
  std::string out_path, vtk_path;
  gen_mesh->add_option("--domain", domain, "lo,hi for every axis, or lo0,hi0,lo1,hi1[,lo2,hi2]")
      ->delimiter(',');
  gen_mesh->add_option("--dim", dim, "2 or 3");
  gen_mesh->add_option("--degree", degree, "polynomial degree 1..4");
  gen_mesh->add_option("--n", n, "cells per axis");
  gen_mesh->add_option("--out", out_path, "mesh JSON")->required();
  gen_mesh->add_option("--export-vtk", vtk_path, "legacy VTK file");

  // gen-metric
  auto* gen_metric = app.add_subcommand("gen-metric", "analytic metric file, optionally sampled on a background");
  gen_metric->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  std::string preset, background_path;
  std::vector<double> sizes;
  BoundaryLayerParams bl;
  bool no_deformation = false;
  int metric_dim = 2;
  gen_metric->add_option("--preset", preset, "constant | boundary-layer")
      ->required()
      ->check(CLI::IsMember({"constant", "boundary-layer"}));
  gen_metric->add_option("--h", sizes, "constant preset: one size h (diag(1, 1/h^2)) or one size per axis")
      ->delimiter(',');
  gen_metric->add_option("--h-m", bl.h_m, "boundary-layer characteristic length");
  gen_metric->add_option("--h-min", bl.h_min, "boundary-layer minimal normal size");
  gen_metric->add_option("--alpha", bl.alpha, "boundary-layer growth rate");
  gen_metric->add_option("--wave-sign", bl.wave_sign, "sign of the cosine in the deformation map");
  gen_metric->add_flag("--no-deformation", no_deformation, "align the layer with the x axis");
  gen_metric->add_option("--dim", metric_dim, "dimension of an analytic constant field");
  gen_metric->add_option("--background", background_path, "sample at the nodes of this mesh");
  gen_metric->add_option("--out", out_path, "metric JSON")->required();

  // shared mesh/metric inputs
  std::string mesh_path, metric_path, report_path, csv_path, objective_name = "size-shape";
  int quad_n1d = 0;

  auto* quality = app.add_subcommand("quality", "element-wise size-shape quality report");
  quality->add_option("--mesh", mesh_path)->required();
  quality->add_option("--metric", metric_path)->required();
  quality->add_option("--objective", objective_name, "size-shape | shape");
  quality->add_option("--quadrature", quad_n1d, "points per direction (default 3p)");
  quality->add_option("--out", report_path, "report JSON")->required();
  quality->add_option("--csv", csv_path, "per-element CSV");
  quality->add_option("--export-vtk", vtk_path);

  auto* measure = app.add_subcommand("measure", "Riemannian length/area/volume statistics");
  int bins = kDefaultHistogramBins;
  std::string hist_prefix;
  measure->add_option("--mesh", mesh_path)->required();
  measure->add_option("--metric", metric_path)->required();
  measure->add_option("--bins", bins)->check(CLI::PositiveNumber);
  measure->add_option("--out", report_path, "report JSON")->required();
  measure->add_option("--histograms", hist_prefix, "write <prefix>_length.csv, ...");

  auto* optimize_cmd = app.add_subcommand("optimize", "minimize the mesh distortion");
  std::string config_path, trace_path;
  OptimizerConfig cfg;
  std::optional<double> rms_tol, step_tol, pcg_rel_tol;
  std::optional<int> max_iters, max_pcg, opt_quad;
  std::optional<std::string> opt_objective;
  optimize_cmd->add_option("--mesh", mesh_path)->required();
  optimize_cmd->add_option("--metric", metric_path)->required();
  optimize_cmd->add_option("--config", config_path, "optimizer config JSON");
  optimize_cmd->add_option("--objective", opt_objective, "size-shape | shape");
  optimize_cmd->add_option("--rms-tol", rms_tol);
  optimize_cmd->add_option("--step-tol", step_tol);
  optimize_cmd->add_option("--max-iters", max_iters);
  optimize_cmd->add_option("--max-pcg-iters", max_pcg);
  optimize_cmd->add_option("--pcg-rel-tol", pcg_rel_tol);
  optimize_cmd->add_option("--quadrature", opt_quad, "points per direction (default 3p)");
  optimize_cmd->add_option("--out", out_path, "optimized mesh JSON")->required();
  optimize_cmd->add_option("--trace", trace_path, "trace CSV");
  optimize_cmd->add_option("--report", report_path, "before/after report JSON");
  optimize_cmd->add_option("--export-vtk", vtk_path);

  auto* error_cmd = app.add_subcommand("error", "interpolation and best-approximation L2 errors");
  std::string function_name;
  double gamma = 0.0;
  error_cmd->add_option("--mesh", mesh_path)->required();
  error_cmd->add_option("--function", function_name)->required()->check(CLI::IsMember({"arctan2d", "arctan3d"}));
  error_cmd->add_option("--gamma", gamma)->required();
  error_cmd->add_option("--quadrature", quad_n1d, "points per direction (default 3p+2)");
  error_cmd->add_option("--out", report_path, "report JSON")->required();

  auto* validate_cmd = app.add_subcommand("validate", "sample-point validity check");
  int sampling = 0;
  validate_cmd->add_option("--mesh", mesh_path)->required();
  validate_cmd->add_option("--metric", metric_path)->required();
  validate_cmd->add_option("--degree-sampling", sampling, "subdivisions per edge (default 3p)");
  validate_cmd->add_option("--out", report_path, "report JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (threads_flag >= 0) {
      global.threads = threads_flag;
    } else if (const char* env = std::getenv("METRA_THREADS"); env && *env) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (*end != '\0' || v < 0) throw ConfigError(std::string("METRA_THREADS is not a thread count: ") + env);
      global.threads = static_cast<int>(v);
    }
    set_num_threads(global.threads.value_or(0));

    if (gen_mesh->parsed()) {
      Manifest manifest("gen-mesh", global);
      Box box;
      if (domain.size() == 2) {
        box.lo.assign(dim, domain[0]);
        box.hi.assign(dim, domain[1]);
      } else if (domain.size() == static_cast<std::size_t>(2 * dim)) {
        for (int c = 0; c < dim; ++c) {
          box.lo.push_back(domain[2 * c]);
          box.hi.push_back(domain[2 * c + 1]);
        }
      } else {
        throw ConfigError("--domain needs 2 or 2*dim values");
      }
      const auto mesh = structured_mesh(box, dim, degree, n);
      write_mesh(out_path, mesh);
      if (!vtk_path.empty()) export_vtk(vtk_path, mesh);
      out << "gen-mesh: " << mesh.num_elements() << " elements, " << mesh.num_nodes() << " nodes -> "
          << out_path << "\n";
      return kExitOk;
    }

    if (gen_metric->parsed()) {
      MetricFile file;
      file.preset = preset;
      if (preset == "constant") {
        if (sizes.empty()) throw ConfigError("--preset constant requires --h");
        for (double s : sizes)
          if (!(s > 0.0)) throw ConfigError("--h values must be positive");
        file.spec = ConstantDiagSpec{sizes};
      } else {
        bl.deformation = !no_deformation;
        if (!(bl.h_m > 0.0) || !(bl.h_min > 0.0) || !(bl.alpha >= 0.0)) {
          throw ConfigError("boundary-layer parameters need h_m > 0, h_min > 0, alpha >= 0");
        }
        file.spec = BoundaryLayerSpec{bl};
        metric_dim = 2;
      }
      file.dim = metric_dim;
      if (!background_path.empty()) {
        auto background = read_mesh(background_path);
        file.dim = background.dim();
        const auto analytic = make_analytic_field(*file.spec, file.dim);
        auto discrete = DiscreteMetricField::sample(*analytic, std::move(background));
        file.nodal_metrics = discrete.nodal_metrics();
        file.background = discrete.background();
      } else {
        make_analytic_field(*file.spec, file.dim);  // validates sizes against dim
      }
      write_text(out_path, metric_to_json(file).dump(1) + "\n");
      out << "gen-metric: " << preset << (file.background ? " sampled on background" : " (analytic)") << " -> "
          << out_path << "\n";
      return kExitOk;
    }

    if (quality->parsed()) {
      Manifest manifest("quality", global);
      manifest.input("mesh", mesh_path);
      manifest.input("metric", metric_path);
      const auto mesh = read_mesh(mesh_path);
      const auto field = load_field(metric_path, mesh.dim());
      const auto kind = distortion_kind_from_string(objective_name);
      const int n1d = quad_n1d > 0 ? quad_n1d : 3 * mesh.degree();
      manifest.config()["objective"] = objective_name;
      manifest.config()["quadrature_n1d"] = n1d;
      const auto report = mesh_report(mesh, *field.field, quadrature(mesh.dim(), n1d), kind);
      write_report(report_path, quality_json(report), manifest);
      if (!csv_path.empty()) {
        std::ostringstream os;
        os << manifest.csv_header() << "element,eta0,q0\n";
        for (std::size_t e = 0; e < report.q0.size(); ++e) {
          os << e << "," << csv_number(report.eta0[e]) << "," << csv_number(report.q0[e]) << "\n";
        }
        write_text(csv_path, os.str());
      }
      if (!vtk_path.empty()) export_vtk(vtk_path, mesh, report.q0);
      out << "quality: mean q0 " << report.stats.mean << ", min " << report.stats.min << ", "
          << report.invalid_elements.size() << " invalid of " << report.q0.size() << "\n";
      return kExitOk;
    }

    if (measure->parsed()) {
      Manifest manifest("measure", global);
      manifest.input("mesh", mesh_path);
      manifest.input("metric", metric_path);
      manifest.config()["bins"] = bins;
      const auto mesh = read_mesh(mesh_path);
      const auto field = load_field(metric_path, mesh.dim());
      manifest.config()["quadrature_n1d"] = 3 * mesh.degree();
      const auto hists = mesh_measures(mesh, *field.field, bins);
      Json report;
      report["entities"] = measures_json(hists);
      write_report(report_path, report, manifest);
      if (!hist_prefix.empty()) write_histograms(hist_prefix, hists, manifest);
      for (const auto& h : hists) {
        out << "measure: " << entity_name(h.dim) << " mean " << h.stats.mean << ", std " << h.stats.std_dev << "\n";
      }
      return kExitOk;
    }

    if (optimize_cmd->parsed()) {
      Manifest manifest("optimize", global);
      manifest.input("mesh", mesh_path);
      manifest.input("metric", metric_path);
      if (!config_path.empty()) {
        manifest.input("config", config_path);
        apply_optimizer_config(read_json(config_path), cfg);
      }
      if (opt_objective) cfg.objective = distortion_kind_from_string(*opt_objective);
      if (rms_tol) cfg.rms_tol = *rms_tol;
      if (step_tol) cfg.step_tol = *step_tol;
      if (max_iters) cfg.max_newton_iters = *max_iters;
      if (max_pcg) cfg.max_pcg_iters = *max_pcg;
      if (pcg_rel_tol) cfg.pcg_rel_tol = *pcg_rel_tol;
      if (opt_quad) cfg.quadrature_n1d = *opt_quad;
      cfg.validate();
      const auto mesh = read_mesh(mesh_path);
      const auto field = load_field(metric_path, mesh.dim());
      manifest.config()["optimizer"] = optimizer_config_to_json(cfg);

      const auto rule = quadrature(mesh.dim(), cfg.quadrature_n1d > 0 ? cfg.quadrature_n1d : 3 * mesh.degree());
      const auto before = mesh_report(mesh, *field.field, rule);
      auto result = optimize(mesh, *field.field, cfg);
      if (manifest.reproducible())
        for (auto& t : result.trace) t.wallclock_ms = 0.0;
      const auto after = mesh_report(result.mesh, *field.field, rule);
      const auto validity = verify_validity(result.mesh, *field.field);

      write_mesh(out_path, result.mesh);
      if (!trace_path.empty()) {
        std::ostringstream os;
        os << manifest.csv_header() << "iter,objective,grad_rms,step,wallclock_ms\n";
        for (const auto& t : result.trace) {
          os << t.iter << "," << csv_number(t.objective) << "," << csv_number(t.grad_rms) << ","
             << csv_number(t.step) << "," << csv_number(t.wallclock_ms) << "\n";
        }
        write_text(trace_path, os.str());
      }
      if (!report_path.empty()) {
        Json report;
        report["stop_reason"] = to_string(result.reason);
        report["iterations"] = result.trace.back().iter;
        report["objective_initial"] = number(result.trace.front().objective);
        report["objective_final"] = number(result.trace.back().objective);
        report["before"] = quality_json(before);
        report["after"] = quality_json(after);
        report["before"]["measures"] = measures_json(mesh_measures(mesh, *field.field));
        report["after"]["measures"] = measures_json(mesh_measures(result.mesh, *field.field));
        report["after"]["sample_invalid_elements"] = validity.invalid_elements;
        write_report(report_path, report, manifest);
      }
      if (!vtk_path.empty()) export_vtk(vtk_path, result.mesh, after.q0);
      out << "optimize: " << to_string(result.reason) << " after " << result.trace.back().iter
          << " iterations, objective " << result.trace.front().objective << " -> " << result.trace.back().objective
          << ", mean q0 " << before.stats.mean << " -> " << after.stats.mean << "\n";
      if (!validity.valid()) {
        err << "optimize: " << validity.invalid_elements.size() << " elements invalid at sample points\n";
        return kExitInvalidMesh;
      }
      return kExitOk;
    }

    if (error_cmd->parsed()) {
      Manifest manifest("error", global);
      manifest.input("mesh", mesh_path);
      const auto mesh = read_mesh(mesh_path);
      const auto u = function_name == "arctan2d" ? AnalyticFunction::arctan2d(gamma) : AnalyticFunction::arctan3d(gamma);
      if (u.dim() != mesh.dim()) throw ConfigError(function_name + " needs a " + std::to_string(u.dim()) + "D mesh");
      const int n1d = quad_n1d > 0 ? quad_n1d : 3 * mesh.degree() + 2;
      manifest.config()["function"] = function_name;
      manifest.config()["gamma"] = gamma;
      manifest.config()["quadrature_n1d"] = n1d;
      manifest.config()["cg_rel_tol"] = 1e-10;
      const auto geometry = verify_validity(mesh, ConstantMetric(Mat::Identity(mesh.dim(), mesh.dim())));
      if (!geometry.valid()) {
        throw InvalidMeshError("mesh has " + std::to_string(geometry.invalid_elements.size()) +
                               " elements with non-positive Jacobian");
      }
      const auto eI = interpolation_error(mesh, u, n1d);
      const auto eA = approximation_error(mesh, u, n1d);
      Json report;
      report["global_eI"] = eI.global;
      report["global_eA"] = eA.global;
      Json per = Json::array();
      for (std::size_t e = 0; e < eI.per_element.size(); ++e) {
        Json row;
        row["eI"] = eI.per_element[e];
        row["eA"] = eA.per_element[e];
        per.push_back(std::move(row));
      }
      report["per_element"] = std::move(per);
      write_report(report_path, report, manifest);
      out << "error: e_I " << eI.global << ", e_A " << eA.global << "\n";
      return kExitOk;
    }

    if (validate_cmd->parsed()) {
      Manifest manifest("validate", global);
      manifest.input("mesh", mesh_path);
      manifest.input("metric", metric_path);
      const auto mesh = read_mesh(mesh_path);
      const auto field = load_field(metric_path, mesh.dim());
      const int m = sampling > 0 ? sampling : 3 * mesh.degree();
      manifest.config()["samples_per_edge"] = m;
      const auto v = verify_validity(mesh, *field.field, m);
      Json report;
      report["valid"] = v.valid();
      report["invalid_elements"] = v.invalid_elements;
      report["samples"] = v.samples;
      report["min_sigma"] = number(v.min_sigma);
      report["min_quality"] = number(v.min_quality);
      write_report(report_path, report, manifest);
      out << "validate: " << (v.valid() ? "valid" : "INVALID") << ", " << v.invalid_elements.size()
          << " invalid elements\n";
      return v.valid() ? kExitOk : kExitInvalidMesh;
    }
  } catch (const InvalidMeshError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidMesh;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolverFailure;
  } catch (const LocationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolverFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  return kExitInvalidInput;
}

}  // namespace metra
