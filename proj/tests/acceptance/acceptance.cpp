// Acceptance checks 1-11. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "metra/cli.hpp"
#include "metra/distortion.hpp"
#include "metra/error_metrics.hpp"
#include "metra/mesh.hpp"
#include "metra/metric_field.hpp"
#include "metra/optimizer.hpp"
#include "metra/riemannian_measure.hpp"
#include "metra/simplex_basis.hpp"

using namespace metra;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

Mat diag19() {
  Mat M = Mat::Zero(2, 2);
  M(0, 0) = 1.0;
  M(1, 1) = 9.0;
  return M;
}

Mat rotation(double t) {
  Mat R(2, 2);
  R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return R;
}

// Unit-edge regular simplex frame: columns are the edges from vertex 0.
Mat regular_frame(int d) {
  Mat E = Mat::Zero(d, d);
  if (d == 2) {
    E << 1.0, 0.5, 0.0, std::sqrt(3.0) / 2;
  } else {
    E << 1.0, 0.5, 0.5, 0.0, std::sqrt(3.0) / 2, std::sqrt(3.0) / 6, 0.0, 0.0, std::sqrt(2.0 / 3.0);
  }
  return E;
}

HighOrderMesh affine_element(int d, int p, const Mat& T) {
  std::vector<double> coords;
  std::vector<int> conn;
  const auto nodes = master_nodes(d, p);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Vec x = T * nodes[i];
    for (int c = 0; c < d; ++c) coords.push_back(x(c));
    conn.push_back(static_cast<int>(i));
  }
  return HighOrderMesh(d, p, coords, conn);
}

HighOrderMesh triangle(const Vec& a, const Vec& b, const Vec& c) {
  return HighOrderMesh(2, 1, {a(0), a(1), b(0), b(1), c(0), c(1)}, {0, 1, 2});
}

Box unit_box(int d) { return {std::vector<double>(d, -0.5), std::vector<double>(d, 0.5)}; }

Outcome closed_form() {
  Mat P = Mat::Identity(2, 2);
  const Mat A = P * regular_frame(2).inverse();
  const auto fd = frobenius_and_det_M(A, Mat::Identity(2, 2));
  const double shape = shape_distortion(fd.frobenius, regularize_det(fd.det), 2);
  const double size = size_distortion(2.0, 2);
  const Mat M = diag19();
  const ConstantMetric field(M);
  const auto ideal = affine_element(2, 2, factorize(M).inverse() * regular_frame(2));
  const double q0 = elemental_distortion(ideal, 0, field, default_rule(ideal)).q0;
  const bool ok = std::abs(shape - 2.0 / std::sqrt(3.0)) <= 1e-12 && size == 1.25 &&
                  std::abs(q0 - 1.0) <= 1e-12;
  return {ok, fmt("eta_shape=%.15f eta_size=%.15f q0=%.15f", shape, size, q0)};
}

Outcome rotation_sweep() {
  const Mat M = diag19();
  const ConstantMetric field(M);
  const Mat T = factorize(M).inverse() * regular_frame(2);
  const Vec a = Vec::Zero(2), b = T.col(0), c = T.col(1);
  const int n = 720;
  const auto rule = quadrature(2, 3);
  std::vector<double> q(n);
  for (int i = 0; i < n; ++i) {
    const Mat R = rotation(2 * kPi * i / n);
    q[i] = elemental_distortion(triangle(R * a, R * b, R * c), 0, field, rule).q0;
  }
  std::vector<int> minima;
  for (int i = 0; i < n; ++i) {
    if (q[i] < q[(i + n - 1) % n] && q[i] < q[(i + 1) % n]) minima.push_back(i);
  }
  bool ok = std::abs(q[0] - 1.0) <= 1e-10 && std::abs(q[n / 2] - 1.0) <= 1e-10 && minima.size() == 2;
  if (minima.size() == 2) {
    ok = ok && std::abs(minima[0] - n / 4) <= 1 && std::abs(minima[1] - 3 * n / 4) <= 1;
  }
  std::string where;
  for (int m : minima) where += fmt(" %.4f", 2 * kPi * m / n);
  return {ok, fmt("q(0)=%.12f q(pi)=%.12f strict minima at theta =%s (q=%.6f)", q[0], q[n / 2],
                  where.c_str(), minima.empty() ? 0.0 : q[minima[0]])};
}

Outcome level_sets() {
  const ConstantMetric field(diag19());
  const auto frame = ElementFrame::make(2, 1);
  const auto tab = Tabulation::make(frame.basis, std::vector<Vec>{v2(1.0 / 3, 1.0 / 3)});
  auto sample = [&](double x, double y) {
    return element_samples(triangle(v2(0, 0), v2(1, 0), v2(x, y)), 0, field, frame, tab,
                           DistortionKind::SizeShape)
        .front();
  };
  const int n = 200;
  double worst = 0.0;
  int mismatches = 0;
  for (int j = 0; j < n; ++j) {
    const double y = -1.0 + 2.0 * (j + 0.5) / n;
    double q_ref = -1.0;
    for (int i = 0; i < n; ++i) {
      const double x = -1.0 + 2.0 * i / (n - 1);
      const auto s = sample(x, y);
      const bool valid = std::isfinite(s.distortion);
      if (valid != (y > 0.0)) ++mismatches;
      const double qs = 1.0 / size_distortion(regularize_det(s.sigma), 2);
      if (q_ref < 0.0) q_ref = qs;
      worst = std::max(worst, std::abs(qs - q_ref));
    }
  }
  return {worst < 1e-12 && mismatches == 0,
          fmt("max size-quality deviation across x = %.3e; validity mismatches = %d / %d", worst, mismatches,
              n * n)};
}

Outcome asymptotics() {
  bool ok = true;
  std::string detail;
  for (int d : {2, 3}) {
    for (double s : {1e3, 1e-3}) {
      const double r = size_distortion(s, d) / size_reference(s, d);
      ok = ok && std::abs(r - 1.0) < 1e-3;
      detail += fmt("d=%d s=%g ratio=%.6f; ", d, s, r);
    }
  }
  detail += fmt("ratio tends to 2^(-2/d) = %.6f (d=2), %.6f (d=3)", std::pow(2.0, -1.0), std::pow(2.0, -2.0 / 3));
  return {ok, detail};
}

double gradient_error(const HighOrderMesh& mesh, const MetricField& field) {
  const OptimizerConfig cfg;
  const MeshObjective obj(mesh, field, cfg);
  const auto x = obj.initial_point();
  std::vector<double> g;
  obj.value_and_gradient(x, g);
  const double h = 1e-6 * mesh.bbox_diagonal();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto p = x, m = x;
    p[k] += h;
    m[k] -= h;
    const double fd = (obj.value(p) - obj.value(m)) / (2 * h);
    num += (g[k] - fd) * (g[k] - fd);
    den += fd * fd;
  }
  return std::sqrt(num / den);
}

HighOrderMesh random_valid(const HighOrderMesh& base, const MetricField& field, double amp, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto dofs = DofMap::from_mesh(base);
  for (;;) {
    HighOrderMesh m = base;
    for (std::size_t i : dofs.coordinate_index) m.coordinates()[i] += amp * u(rng);
    if (std::isfinite(objective(m, field, OptimizerConfig{}))) return m;
    amp *= 0.5;
  }
}

Outcome gradient_check() {
  std::mt19937 rng(2024);
  const BoundaryLayerMetric bl(BoundaryLayerParams{});
  const auto base2 = structured_mesh(unit_box(2), 2, 2, 3);
  Mat B(3, 3);
  B << 2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 4.0;
  const ConstantMetric aniso(B * B.transpose());
  const auto base3 = structured_mesh(unit_box(3), 3, 2, 1);
  double worst2 = 0.0, worst3 = 0.0;
  for (int s = 0; s < 20; ++s) {
    worst2 = std::max(worst2, gradient_error(random_valid(base2, bl, 0.03, rng), bl));
    worst3 = std::max(worst3, gradient_error(random_valid(base3, aniso, 0.04, rng), aniso));
  }
  return {worst2 < 1e-6 && worst3 < 1e-6,
          fmt("worst relative l2 error: 2D p=2 boundary layer %.3e, 3D p=2 anisotropic %.3e", worst2, worst3)};
}

struct Summary {
  double mean_q0 = 0, min_q0 = 0, length_std = 0, area_std = 0;
  std::size_t sample_invalid = 0;
};

Summary summarize(const HighOrderMesh& mesh, const MetricField& field) {
  Summary s;
  const auto rep = mesh_report(mesh, field, default_rule(mesh));
  s.mean_q0 = rep.stats.mean;
  s.min_q0 = rep.stats.min;
  const auto meas = mesh_measures(mesh, field);
  s.length_std = meas[0].stats.std_dev;
  s.area_std = meas[1].stats.std_dev;
  s.sample_invalid = verify_validity(mesh, field).invalid_elements.size();
  return s;
}

// Shared state for criteria 6, 7 and 10.
struct BoundaryLayerRun {
  HighOrderMesh initial;
  OptimizeResult size_shape;
  OptimizeResult shape_only;
  Summary before, after, after_shape;
  double seconds_size_shape = 0.0;
  bool done = false;
};

BoundaryLayerRun& bl_run() {
  static BoundaryLayerRun run;
  if (run.done) return run;
  static const BoundaryLayerMetric bl(BoundaryLayerParams{});
  run.initial = structured_mesh(unit_box(2), 2, 2, 8);
  run.before = summarize(run.initial, bl);
  const auto t0 = std::chrono::steady_clock::now();
  run.size_shape = optimize(run.initial, bl, OptimizerConfig{});
  run.seconds_size_shape = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.after = summarize(run.size_shape.mesh, bl);
  OptimizerConfig shape;
  shape.objective = DistortionKind::ShapeOnly;
  run.shape_only = optimize(run.initial, bl, shape);
  run.after_shape = summarize(run.shape_only.mesh, bl);
  run.done = true;
  return run;
}

Outcome boundary_layer_reproduction() {
  const auto& r = bl_run();
  const double dq = (r.after.mean_q0 - r.before.mean_q0) / r.before.mean_q0;
  const double dl = (r.before.length_std - r.after.length_std) / r.before.length_std;
  const double da = (r.before.area_std - r.after.area_std) / r.before.area_std;
  const bool ok = dq >= 0.2 && dl >= 0.2 && da >= 0.2 && r.after.min_q0 > r.before.min_q0 &&
                  r.after.sample_invalid == 0 && r.seconds_size_shape < 600.0;
  return {ok, fmt("mean q0 %.4f -> %.4f (%+.1f%%), min q0 %.4f -> %.4f, length std %.4f -> %.4f (-%.1f%%), "
                  "area std %.4f -> %.4f (-%.1f%%), invalid at 3p samples %zu, %.0f s",
                  r.before.mean_q0, r.after.mean_q0, 100 * dq, r.before.min_q0, r.after.min_q0,
                  r.before.length_std, r.after.length_std, 100 * dl, r.before.area_std, r.after.area_std,
                  100 * da, r.after.sample_invalid, r.seconds_size_shape)};
}

Outcome shape_contrast() {
  const auto& r = bl_run();
  const bool ok = r.after.length_std <= r.after_shape.length_std && r.after.area_std <= r.after_shape.area_std;
  return {ok, fmt("length std size-shape %.4f vs shape %.4f; area std size-shape %.4f vs shape %.4f",
                  r.after.length_std, r.after_shape.length_std, r.after.area_std, r.after_shape.area_std)};
}

Outcome unitary_suite() {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 2;
    Mat B(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) B(i, j) = u(rng);
    const Mat M = B * B.transpose() + 0.1 * Mat::Identity(d, d);
    const ConstantMetric field(M);
    const auto mesh = affine_element(d, 2, factorize(M).inverse() * regular_frame(d));
    for (int k = 1; k <= d; ++k) {
      for (const auto& e : sub_entities(mesh, k)) {
        worst = std::max(worst, std::abs(entity_measure(mesh, e, field, quadrature(k, 6)) - 1.0));
      }
    }
  }
  return {worst <= 1e-8, fmt("max |V_M - 1| over cells and sub-entities of 100 ideal elements: %.3e", worst)};
}

Outcome error_improvement() {
  const auto t0 = std::chrono::steady_clock::now();
  BoundaryLayerParams params;
  params.wave_sign = 1;  // layer curve y = -cos(2 pi x)/10, the arctan transition
  const BoundaryLayerMetric analytic(params);
  const auto field = DiscreteMetricField::sample(analytic, structured_mesh(unit_box(2), 2, 2, 16));
  const auto initial = structured_mesh(unit_box(2), 2, 2, 8);
  const auto res = optimize(initial, field, OptimizerConfig{});
  const bool valid = verify_validity(res.mesh, field).valid();
  const auto fn = AnalyticFunction::arctan2d(20.0);
  const ScalarFunction u = [&](const Vec& x) { return fn(x); };
  const double eI0 = interpolation_error(initial, u).global, eA0 = approximation_error(initial, u).global;
  const double eI1 = interpolation_error(res.mesh, u).global, eA1 = approximation_error(res.mesh, u).global;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = eI1 < eI0 && eA1 < eA0 && eA0 <= eI0 + 1e-10 && eA1 <= eI1 + 1e-10 && valid && secs < 600.0;
  return {ok, fmt("e_I %.5f -> %.5f, e_A %.5f -> %.5f, %zu iterations, %s, %.0f s", eI0, eI1, eA0, eA1,
                  res.trace.size() - 1, valid ? "valid" : "INVALID", secs)};
}

Outcome optimizer_contract() {
  const auto& r = bl_run();
  int increases = 0;
  for (const auto* res : {&r.size_shape, &r.shape_only}) {
    for (std::size_t i = 1; i < res->trace.size(); ++i) {
      if (res->trace[i].objective > res->trace[i - 1].objective) ++increases;
    }
  }
  std::size_t moved_frozen = 0;
  for (const auto* res : {&r.size_shape, &r.shape_only}) {
    for (std::size_t i = 0; i < r.initial.num_nodes(); ++i) {
      for (int c = 0; c < 2; ++c) {
        if (r.initial.constraints()[i].is_frozen(c) && res->mesh.node(i)(c) != r.initial.node(i)(c)) ++moved_frozen;
      }
    }
  }
  const OptimizerConfig cfg;
  bool terminated = true;
  std::string reasons;
  for (const auto* res : {&r.size_shape, &r.shape_only}) {
    const auto& last = res->trace.back();
    const bool by_grad = res->reason == StopReason::GradientTolerance && last.grad_rms <= cfg.rms_tol;
    const bool by_step = res->reason == StopReason::StepTolerance;
    terminated = terminated && (by_grad || by_step);
    reasons += fmt("%s after %zu iterations (grad rms %.3e); ", to_string(res->reason).c_str(),
                   res->trace.size() - 1, last.grad_rms);
  }
  return {increases == 0 && moved_frozen == 0 && terminated,
          fmt("objective increases %d, moved frozen coordinates %zu; ", increases, moved_frozen) + reasons};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("metra_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) { return run_cli(args, out, err); };
  const std::string mesh = (dir / "m.json").string(), metric = (dir / "bl.json").string();
  bool ok = run({"gen-mesh", "--dim", "2", "--degree", "2", "--n", "4", "--out", mesh}) == 0 &&
            run({"gen-metric", "--preset", "boundary-layer", "--out", metric}) == 0;
  const int many = std::max(4, static_cast<int>(std::thread::hardware_concurrency()));
  for (int t : {1, many}) {
    const std::string s = std::to_string(t);
    ok = ok && run({"--threads", s, "--reproducible", "optimize", "--mesh", mesh, "--metric", metric,
                    "--out", (dir / ("o" + s + ".json")).string(), "--trace",
                    (dir / ("t" + s + ".csv")).string(), "--report", (dir / ("r" + s + ".json")).string()}) == 0;
  }
  const std::string n = std::to_string(many);
  std::size_t differing = 0;
  for (const char* stem : {"o", "t", "r"}) {
    const char* ext = std::string(stem) == "t" ? ".csv" : ".json";
    if (slurp(dir / (stem + std::string("1") + ext)) != slurp(dir / (stem + n + ext))) ++differing;
  }
  fs::remove_all(dir);
  return {ok && differing == 0,
          fmt("--threads 1 vs --threads %d: %zu of 3 output files differ", many, differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<double, std::function<Outcome()>>> criteria = {
      {1.0, closed_form},        {5.0, rotation_sweep},   {5.0, level_sets},
      {0.0, asymptotics},        {60.0, gradient_check},  {0.0, boundary_layer_reproduction},
      {0.0, shape_contrast},     {0.0, unitary_suite},    {0.0, error_improvement},
      {0.0, optimizer_contract}, {0.0, determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [limit, check] = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0.0 && secs >= limit) {
      o.pass = false;
      o.detail += fmt(" [runtime limit %.0f s exceeded]", limit);
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2zu: %s  %s (%.2f s)\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
