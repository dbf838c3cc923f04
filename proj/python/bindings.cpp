#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "metra/cli.hpp"
#include "metra/distortion.hpp"
#include "metra/error_metrics.hpp"
#include "metra/errors.hpp"
#include "metra/io.hpp"
#include "metra/metric_field.hpp"
#include "metra/optimizer.hpp"
#include "metra/riemannian_measure.hpp"

namespace py = pybind11;
using namespace metra;

namespace {

Mat to_mat(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1 || m.rows() > 3)
    throw ConfigError("expected a square matrix of size 1 to 3");
  return m;
}

Vec to_vec(const Eigen::VectorXd& v) {
  if (v.size() < 1 || v.size() > 3) throw ConfigError("expected a vector of size 1 to 3");
  return v;
}

py::dict stats_dict(const Stats& s) {
  py::dict d;
  d["min"] = s.min;
  d["max"] = s.max;
  d["mean"] = s.mean;
  d["std"] = s.std_dev;
  d["count"] = s.count;
  return d;
}

// Borrows f; the library may call it from worker threads, so the caller
// must release the GIL and keep f alive.
ScalarFunction borrow(const py::function& f) {
  return [fp = &f](const Vec& x) {
    py::gil_scoped_acquire gil;
    return (*fp)(Eigen::VectorXd(x)).cast<double>();
  };
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "High-order mesh distortion and optimization under a Riemannian metric";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "MetraError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::enum_<DistortionKind>(m, "DistortionKind")
      .value("SizeShape", DistortionKind::SizeShape)
      .value("ShapeOnly", DistortionKind::ShapeOnly);

  py::class_<HighOrderMesh>(m, "Mesh")
      .def(py::init<int, int, std::vector<double>, std::vector<int>>(), py::arg("dim"),
           py::arg("degree"), py::arg("coords"), py::arg("connectivity"))
      .def_property_readonly("dim", &HighOrderMesh::dim)
      .def_property_readonly("degree", &HighOrderMesh::degree)
      .def_property_readonly("num_nodes", &HighOrderMesh::num_nodes)
      .def_property_readonly("num_elements", &HighOrderMesh::num_elements)
      .def_property_readonly("coords",
                             [](const HighOrderMesh& mesh) { return mesh.coordinates(); })
      .def_property_readonly("connectivity", &HighOrderMesh::connectivity)
      .def("to_json", [](const HighOrderMesh& mesh) { return mesh_to_json(mesh).dump(); })
      .def_static("from_json",
                  [](const std::string& text) { return mesh_from_json(Json::parse(text)); });

  m.def(
      "structured_mesh",
      [](int dim, int degree, int n, std::vector<double> lo, std::vector<double> hi) {
        if (lo.empty()) lo.assign(dim, -0.5);
        if (hi.empty()) hi.assign(dim, 0.5);
        return structured_mesh(Box{lo, hi}, dim, degree, n);
      },
      py::arg("dim"), py::arg("degree"), py::arg("n"), py::arg("lo") = std::vector<double>{},
      py::arg("hi") = std::vector<double>{});

  py::class_<MetricField, std::shared_ptr<MetricField>>(m, "MetricField")
      .def_property_readonly("dim", &MetricField::dim)
      .def("__call__", [](const MetricField& f, const Eigen::VectorXd& x) {
        return Eigen::MatrixXd(f.eval(to_vec(x)));
      });

  py::class_<ConstantMetric, MetricField, std::shared_ptr<ConstantMetric>>(m, "ConstantMetric")
      .def(py::init([](const Eigen::MatrixXd& M) {
        return std::make_shared<ConstantMetric>(to_mat(M));
      }))
      .def_static("from_sizes", [](const std::vector<double>& sizes) {
        return std::make_shared<ConstantMetric>(ConstantMetric::from_sizes(sizes));
      });

  py::class_<BoundaryLayerMetric, MetricField, std::shared_ptr<BoundaryLayerMetric>>(
      m, "BoundaryLayerMetric")
      .def(py::init([](double h_m, double h_min, double alpha, bool deformation, double wave_sign) {
             return std::make_shared<BoundaryLayerMetric>(
                 BoundaryLayerParams{h_m, h_min, alpha, deformation, wave_sign});
           }),
           py::arg("h_m") = 0.25, py::arg("h_min") = 0.01, py::arg("alpha") = 2.0,
           py::arg("deformation") = true, py::arg("wave_sign") = -1.0);

  py::class_<DiscreteMetricField, MetricField, std::shared_ptr<DiscreteMetricField>>(
      m, "DiscreteMetricField")
      .def_static("sample", [](const MetricField& field, const HighOrderMesh& background) {
        return std::make_shared<DiscreteMetricField>(DiscreteMetricField::sample(field, background));
      });

  m.def("metric_log", [](const Eigen::MatrixXd& M) { return Eigen::MatrixXd(metric_log(to_mat(M))); });
  m.def("metric_exp", [](const Eigen::MatrixXd& S) { return Eigen::MatrixXd(metric_exp(to_mat(S))); });

  m.def(
      "pointwise_distortion",
      [](const Eigen::MatrixXd& A, const Eigen::MatrixXd& M, DistortionKind kind) {
        return pointwise_distortion(to_mat(A), to_mat(M), kind);
      },
      py::arg("A"), py::arg("M"), py::arg("kind") = DistortionKind::SizeShape);

  m.def(
      "quality",
      [](const HighOrderMesh& mesh, const MetricField& field, DistortionKind kind) {
        const auto report = mesh_report(mesh, field, default_rule(mesh), kind);
        py::dict d;
        d["q0"] = report.q0;
        d["eta0"] = report.eta0;
        d["invalid_elements"] = report.invalid_elements;
        d["stats"] = stats_dict(report.stats);
        return d;
      },
      py::arg("mesh"), py::arg("field"), py::arg("kind") = DistortionKind::SizeShape);

  m.def(
      "measures",
      [](const HighOrderMesh& mesh, const MetricField& field) {
        py::list out;
        for (const auto& h : mesh_measures(mesh, field)) {
          py::dict d;
          d["dim"] = h.dim;
          d["measures"] = h.measures;
          d["stats"] = stats_dict(h.stats);
          out.append(d);
        }
        return out;
      },
      py::arg("mesh"), py::arg("field"));

  m.def(
      "optimize",
      [](const HighOrderMesh& mesh, const MetricField& field, DistortionKind kind,
         int max_newton_iters, double rms_tol, double step_tol) {
        OptimizerConfig cfg;
        cfg.objective = kind;
        cfg.max_newton_iters = max_newton_iters;
        cfg.rms_tol = rms_tol;
        cfg.step_tol = step_tol;
        cfg.validate();
        OptimizeResult res;
        {
          py::gil_scoped_release release;
          res = optimize(mesh, field, cfg);
        }
        py::list trace;
        for (const auto& t : res.trace) {
          py::dict e;
          e["iter"] = t.iter;
          e["objective"] = t.objective;
          e["grad_rms"] = t.grad_rms;
          e["step"] = t.step;
          trace.append(e);
        }
        return py::make_tuple(res.mesh, trace, to_string(res.reason));
      },
      py::arg("mesh"), py::arg("field"), py::arg("kind") = DistortionKind::SizeShape,
      py::arg("max_newton_iters") = 200, py::arg("rms_tol") = 1e-4, py::arg("step_tol") = 1e-4);

  m.def(
      "interpolation_error",
      [](const HighOrderMesh& mesh, const py::function& u) {
        const ScalarFunction f = borrow(u);
        py::gil_scoped_release release;
        return interpolation_error(mesh, f).global;
      },
      py::arg("mesh"), py::arg("u"));
  m.def(
      "approximation_error",
      [](const HighOrderMesh& mesh, const py::function& u) {
        const ScalarFunction f = borrow(u);
        py::gil_scoped_release release;
        return approximation_error(mesh, f).global;
      },
      py::arg("mesh"), py::arg("u"));

  // runs a CLI command line, returns (exit code, stdout, stderr)
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
