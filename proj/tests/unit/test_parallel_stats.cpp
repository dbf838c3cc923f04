#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <vector>

#include "metra/parallel.hpp"
#include "metra/stats.hpp"

using namespace metra;

TEST_CASE("stats against a naive two-pass computation") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n : {1u, 2u, 7u, 9u, 100u, 1001u}) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const auto s = compute_stats(v);
    CHECK(s.count == n);
    CHECK(s.mean == doctest::Approx(mean).epsilon(1e-13));
    CHECK(s.std_dev == doctest::Approx(std::sqrt(var / static_cast<double>(n))).epsilon(1e-10));
    CHECK(s.min == *std::min_element(v.begin(), v.end()));
    CHECK(s.max == *std::max_element(v.begin(), v.end()));
  }
  const auto empty = compute_stats({});
  CHECK(empty.count == 0);
  CHECK(empty.mean == 0.0);
  const std::vector<double> ones(5, 1.0);
  CHECK(compute_stats(ones).std_dev == 0.0);
}

TEST_CASE("parallel_for visits every index once for any thread count") {
  const int saved = num_threads();
  for (int t : {1, 2, 3, 8}) {
    set_num_threads(t);
    CHECK(num_threads() == t);
    for (std::size_t n : {0u, 1u, 5u, 1000u}) {
      std::vector<std::atomic<int>> hits(n);
      parallel_for(n, [&](std::size_t i) { hits[i]++; });
      for (auto& h : hits) CHECK(h.load() == 1);
    }
  }
  set_num_threads(saved);
}

TEST_CASE("slot-wise results and pairwise sums are thread independent") {
  std::vector<double> ref;
  for (int t : {1, 4}) {
    set_num_threads(t);
    std::vector<double> out(777);
    parallel_for(out.size(), [&](std::size_t i) { out[i] = std::sin(0.1 * static_cast<double>(i)); });
    if (ref.empty()) {
      ref = out;
    } else {
      CHECK(out == ref);
    }
    CHECK(pairwise_sum(out) == pairwise_sum(ref));
  }
}
