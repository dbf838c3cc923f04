#pragma once

#include <span>

namespace metra {

struct Stats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t count = 0;
};

// Pairwise summation; the reduction order depends only on values.size().
double pairwise_sum(std::span<const double> values);

// Population standard deviation. Empty input yields all zeros.
Stats compute_stats(std::span<const double> values);

}  // namespace metra
