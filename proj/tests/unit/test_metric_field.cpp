#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "metra/errors.hpp"
#include "metra/metric_field.hpp"

using namespace metra;

namespace {

Mat random_spd(int d, std::mt19937& rng, double spread = 3.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-spread, spread);
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd lam(d);
  for (int i = 0; i < d; ++i) lam(i) = std::exp(u(rng));
  return Q * lam.asDiagonal() * Q.transpose();
}

double rel_diff(const Mat& a, const Mat& b) { return (a - b).norm() / b.norm(); }

// Independent exponential: scaling and squaring of a truncated Taylor series.
Mat oracle_exp(const Mat& S) {
  int squarings = 0;
  double norm = S.norm();
  while (norm > 0.1) {
    norm /= 2;
    ++squarings;
  }
  const Mat A = S / std::pow(2.0, squarings);
  Mat term = Mat::Identity(S.rows(), S.cols());
  Mat sum = term;
  for (int k = 1; k < 20; ++k) {
    term = term * A / k;
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// Smooth analytic test field: rotated anisotropic diagonal.
class SmoothField final : public MetricField {
 public:
  explicit SmoothField(int d) : d_(d) {}
  int dim() const override { return d_; }
  Mat eval(const Vec& x) const override {
    const double th = 0.7 * x(0) + 0.4 * x(1);
    Mat R = Mat::Identity(d_, d_);
    R(0, 0) = std::cos(th);
    R(0, 1) = -std::sin(th);
    R(1, 0) = std::sin(th);
    R(1, 1) = std::cos(th);
    Mat D = Mat::Zero(d_, d_);
    D(0, 0) = std::exp(x(0));
    D(1, 1) = 4.0 * std::exp(-x(1));
    if (d_ == 3) D(2, 2) = 1.0 + x(2) * x(2);
    return R * D * R.transpose();
  }
  MetricSample eval_with_gradient(const Vec& x) const override {
    MetricSample s;
    s.value = eval(x);
    return s;
  }

 private:
  int d_;
};

Box box(int d, double lo, double hi) { return {std::vector<double>(d, lo), std::vector<double>(d, hi)}; }

}  // namespace

TEST_CASE("matrix logarithm and exponential") {
  CHECK(metric_log(Mat::Identity(2, 2)).norm() == 0.0);
  Mat d19 = Mat::Zero(2, 2);
  d19(0, 0) = 1;
  d19(1, 1) = 9;
  const Mat L = metric_log(d19);
  CHECK(std::abs(L(0, 0)) < 1e-15);
  CHECK(std::abs(L(1, 1) - 2 * std::log(3.0)) < 1e-14);
  CHECK(std::abs(L(0, 1)) < 1e-15);

  std::mt19937 rng(5);
  for (int s = 0; s < 100; ++s) {
    const int d = 2 + s % 2;
    const Mat M = random_spd(d, rng);
    CHECK(rel_diff(metric_exp(metric_log(M)), M) < 1e-10);
    CHECK(rel_diff(oracle_exp(metric_log(M)), M) < 1e-10);
  }
  Mat singular = Mat::Zero(2, 2);
  singular(0, 0) = 1;
  CHECK_THROWS_AS(metric_log(singular), SingularMetricError);
  Mat indefinite = Mat::Identity(2, 2);
  indefinite(1, 1) = -1;
  CHECK_THROWS_AS(metric_log(indefinite), SingularMetricError);
  CHECK_THROWS_AS(validate_metric(indefinite), SingularMetricError);
  Mat asym = Mat::Identity(2, 2);
  asym(0, 1) = 0.1;
  CHECK_THROWS_AS(validate_metric(asym), SingularMetricError);
}

TEST_CASE("exp Frechet derivative matches central differences") {
  std::mt19937 rng(9);
  for (int s = 0; s < 20; ++s) {
    const int d = 2 + s % 2;
    const Mat S = metric_log(random_spd(d, rng));
    Mat E = metric_log(random_spd(d, rng));
    const double h = 1e-6;
    const Mat fd = (metric_exp(S + h * E) - metric_exp(S - h * E)) / (2 * h);
    CHECK(rel_diff(metric_exp_derivative(S, E), fd) < 1e-7);
  }
  // repeated eigenvalues
  const Mat S = Mat::Identity(2, 2) * 0.3;
  Mat E = Mat::Zero(2, 2);
  E(0, 1) = E(1, 0) = 1.0;
  CHECK(rel_diff(metric_exp_derivative(S, E), std::exp(0.3) * E) < 1e-14);
}

TEST_CASE("factorize") {
  CHECK((factorize(Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm() == 0.0);
  Mat d19 = Mat::Zero(2, 2);
  d19(0, 0) = 1;
  d19(1, 1) = 9;
  const Mat F = factorize(d19);
  CHECK(std::abs(F(0, 0) - 1) < 1e-15);
  CHECK(std::abs(F(1, 1) - 3) < 1e-15);
  CHECK(F(1, 0) == 0.0);
  std::mt19937 rng(2);
  for (int s = 0; s < 50; ++s) {
    const Mat M = random_spd(2 + s % 2, rng);
    const Mat G = factorize(M);
    CHECK(rel_diff(G.transpose() * G, M) < 1e-12);
    CHECK(G(1, 0) == 0.0);
  }
  CHECK_THROWS(factorize(-Mat::Identity(2, 2)));
}

TEST_CASE("analytic presets") {
  const auto c = make_analytic_field(ConstantDiagSpec{{1.0 / 3.0}}, 2);
  Vec x(2);
  x << 0.3, -0.2;
  const Mat M = c->eval(x);
  CHECK(M(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(M(1, 1) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(M(0, 1) == 0.0);
  CHECK_THROWS_AS(make_analytic_field(ConstantDiagSpec{{1.0, 2.0, 3.0}}, 2), ConfigError);
  CHECK_THROWS_AS(make_analytic_field(ConstantDiagSpec{{-1.0}}, 2), ConfigError);

  BoundaryLayerParams flat;
  flat.h_m = 1.0;
  flat.deformation = false;
  const BoundaryLayerMetric bl(flat);
  Vec origin = Vec::Zero(2);
  const Mat B = bl.eval(origin);
  CHECK(B(0, 0) == doctest::Approx(1.0));
  CHECK(B(1, 1) == doctest::Approx(10000.0));
  CHECK(B(0, 1) == 0.0);

  // Stretching ratio sqrt(lmax / lmin) of the layer: 100 on the curve, about 1 at |y| = 0.5.
  auto ratio = [&](double y) {
    Vec p(2);
    p << 0.1, y;
    const Eigen::MatrixXd Mp = bl.eval(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Mp);
    return std::sqrt(es.eigenvalues()(1) / es.eigenvalues()(0));
  };
  CHECK(ratio(0.0) == doctest::Approx(100.0));
  CHECK(ratio(-0.5) == doctest::Approx(1.01));
  CHECK(ratio(0.5) == doctest::Approx(1.01));

  CHECK_THROWS_AS(BoundaryLayerMetric(BoundaryLayerParams{0.25, 0.0, 2.0, true, -1.0}), ConfigError);
  CHECK_THROWS_AS(BoundaryLayerMetric(BoundaryLayerParams{0.0, 0.01, 2.0, true, -1.0}), ConfigError);
}

TEST_CASE("boundary-layer metric follows the deformed curve and has exact derivatives") {
  const BoundaryLayerMetric bl(BoundaryLayerParams{});
  // highest anisotropy where 10 y = cos(2 pi x)
  auto ratio = [&](double x0, double y0) {
    Vec p(2);
    p << x0, y0;
    const Eigen::MatrixXd Mp = bl.eval(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Mp);
    return std::sqrt(es.eigenvalues()(1) / es.eigenvalues()(0));
  };
  for (double x0 : {-0.4, -0.1, 0.0, 0.25, 0.45}) {
    const double yc = std::cos(2 * M_PI * x0) / 10.0;
    const double peak = ratio(x0, yc);
    CHECK(peak > 50.0);
    for (double dy : {-0.05, -0.01, 0.01, 0.05}) CHECK(ratio(x0, yc + dy) < peak);
  }
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int s = 0; s < 50; ++s) {
    Vec p(2);
    p << u(rng), u(rng);
    const auto sample = bl.eval_with_gradient(p);
    CHECK(rel_diff(sample.value, bl.eval(p)) == 0.0);
    for (int c = 0; c < 2; ++c) {
      const double h = 1e-7;
      Vec a = p, b = p;
      a(c) += h;
      b(c) -= h;
      const Mat fd = (bl.eval(a) - bl.eval(b)) / (2 * h);
      CHECK((sample.gradient[c] - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("discrete field: constant data, nodes, geometric mean") {
  const auto bg = structured_mesh(box(2, 0.0, 1.0), 2, 1, 1);
  Mat M0 = Mat::Zero(2, 2);
  M0 << 3.0, 0.5, 0.5, 2.0;
  const DiscreteMetricField constant(bg, std::vector<Mat>(bg.num_nodes(), M0));
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 100; ++s) {
    Vec x(2);
    x << u(rng), u(rng);
    CHECK(rel_diff(constant.interpolate(x), M0) < 1e-14);
  }

  // diag(a) on x = 0, diag(b) on x = 1: the midpoint is diag(sqrt(a b))
  const double a = 2.0, b = 50.0;
  std::vector<Mat> nodal;
  for (std::size_t i = 0; i < bg.num_nodes(); ++i) {
    nodal.push_back(Mat::Identity(2, 2) * (bg.node(i)(0) == 0.0 ? a : b));
  }
  const DiscreteMetricField blend(bg, nodal);
  for (double y : {0.0, 0.3, 0.5, 1.0}) {
    Vec x(2);
    x << 0.5, y;
    CHECK(rel_diff(blend.interpolate(x), Mat::Identity(2, 2) * std::sqrt(a * b)) < 1e-12);
  }
  for (std::size_t i = 0; i < bg.num_nodes(); ++i) {
    CHECK(rel_diff(blend.interpolate(bg.node(i)), nodal[i]) < 1e-10);
  }
  CHECK_THROWS_AS(DiscreteMetricField(bg, std::vector<Mat>(3, M0)), ConfigError);
}

TEST_CASE("discrete field: nodal reproduction on curved quadratic backgrounds") {
  for (int d = 2; d <= 3; ++d) {
    auto bg = structured_mesh(box(d, -1.0, 1.0), d, 2, 2);
    // bend interior nodes smoothly
    for (std::size_t i = 0; i < bg.num_nodes(); ++i) {
      Vec x = bg.node(i);
      if (bg.constraints()[i].kind == ConstraintKind::Free) x(0) += 0.08 * std::sin(2.0 * x(1));
      bg.set_node(i, x);
    }
    std::mt19937 rng(d);
    std::vector<Mat> nodal;
    for (std::size_t i = 0; i < bg.num_nodes(); ++i) nodal.push_back(random_spd(d, rng, 2.0));
    const DiscreteMetricField field(bg, nodal);
    for (std::size_t i = 0; i < bg.num_nodes(); ++i) {
      CHECK(rel_diff(field.interpolate(bg.node(i)), nodal[i]) < 1e-10);
    }
    // inversion recovers master coordinates of interior points
    const auto basis = LagrangeBasis::equispaced(d, 2);
    std::uniform_real_distribution<double> u(0.05, 0.3);
    for (std::size_t e = 0; e < bg.num_elements(); e += 3) {
      Vec xi(d);
      for (int c = 0; c < d; ++c) xi(c) = u(rng);
      const Vec x = bg.element_coords(e) * basis.values(xi);
      const auto loc = field.locate(x, true);
      CHECK(loc.inside);
      const Vec back = bg.element_coords(loc.element) * basis.values(loc.xi);
      CHECK((back - x).norm() < 1e-12);
    }
  }
}

TEST_CASE("discrete field: SPD everywhere, deterministic") {
  for (int d = 2; d <= 3; ++d) {
    const auto bg = structured_mesh(box(d, 0.0, 1.0), d, 2, 2);
    std::mt19937 rng(17 + d);
    std::vector<Mat> nodal;
    for (std::size_t i = 0; i < bg.num_nodes(); ++i) nodal.push_back(random_spd(d, rng, 4.0));
    const DiscreteMetricField field(bg, nodal);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int samples = d == 2 ? 10000 : 3000;
    for (int s = 0; s < samples; ++s) {
      Vec x(d);
      for (int c = 0; c < d; ++c) x(c) = u(rng);
      const Mat M = field.interpolate(x);
      CHECK_NOTHROW(validate_metric(M));
      if (s % 100 == 0) CHECK((field.interpolate(x) - M).norm() == 0.0);
    }
  }
}

TEST_CASE("discrete field: domain handling") {
  const auto bg = structured_mesh(box(2, 0.0, 1.0), 2, 1, 2);
  std::vector<Mat> nodal;
  for (std::size_t i = 0; i < bg.num_nodes(); ++i) nodal.push_back(Mat::Identity(2, 2) * (1.0 + bg.node(i)(0)));
  const DiscreteMetricField field(bg, nodal);
  Vec near(2), far(2), edge(2);
  near << 1.0 + 5e-9, 0.5;
  far << 1.5, 0.5;
  edge << 1.0, 0.5;
  CHECK_NOTHROW(field.interpolate(near));
  CHECK(rel_diff(field.interpolate(near), field.interpolate(edge)) < 1e-8);
  CHECK_THROWS_AS(field.interpolate(far), OutOfDomainError);
  // lenient evaluation projects onto the background
  CHECK(rel_diff(field.eval(far), field.interpolate(edge)) < 1e-12);
}

TEST_CASE("discrete field: gradient is the derivative of the interpolant") {
  for (int d = 2; d <= 3; ++d) {
    auto bg = structured_mesh(box(d, 0.0, 1.0), d, 2, 2);
    for (std::size_t i = 0; i < bg.num_nodes(); ++i) {
      Vec x = bg.node(i);
      if (bg.constraints()[i].kind == ConstraintKind::Free) x(1) += 0.05 * std::sin(3.0 * x(0));
      bg.set_node(i, x);
    }
    std::mt19937 rng(40 + d);
    std::vector<Mat> nodal;
    for (std::size_t i = 0; i < bg.num_nodes(); ++i) nodal.push_back(random_spd(d, rng, 1.5));
    const DiscreteMetricField field(bg, nodal);
    const auto basis = LagrangeBasis::equispaced(d, 2);
    std::uniform_real_distribution<double> u(0.1, 0.2);
    for (std::size_t e = 0; e < bg.num_elements(); e += 2) {
      Vec xi(d);
      for (int c = 0; c < d; ++c) xi(c) = u(rng);
      const Vec x = bg.element_coords(e) * basis.values(xi);
      const auto s = field.eval_with_gradient(x);
      for (int c = 0; c < d; ++c) {
        const double h = 1e-6;
        Vec a = x, b = x;
        a(c) += h;
        b(c) -= h;
        const Mat fd = (field.interpolate(a) - field.interpolate(b)) / (2 * h);
        CHECK((s.gradient[c] - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
      }
    }
  }
}

TEST_CASE("discrete field converges to the sampled analytic field") {
  for (int q = 1; q <= 2; ++q) {
    const SmoothField exact(2);
    std::vector<double> errors;
    for (int n : {4, 8, 16}) {
      const auto field = DiscreteMetricField::sample(exact, structured_mesh(box(2, 0.0, 1.0), 2, q, n));
      std::mt19937 rng(3);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      double worst = 0;
      for (int s = 0; s < 2000; ++s) {
        Vec x(2);
        x << u(rng), u(rng);
        worst = std::max(worst, (metric_log(field.interpolate(x)) - metric_log(exact.eval(x))).norm());
      }
      errors.push_back(worst);
    }
    for (int k = 0; k + 1 < 3; ++k) {
      const double order = std::log2(errors[k] / errors[k + 1]);
      MESSAGE("degree " << q << " observed order " << order);
      CHECK(order >= q);
    }
  }
}
