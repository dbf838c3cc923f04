#include "metra/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace metra {

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Stats compute_stats(std::span<const double> values) {
  Stats s;
  s.count = values.size();
  if (values.empty()) return s;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  s.mean = pairwise_sum(values) / static_cast<double>(values.size());
  std::vector<double> sq(values.size());
  std::transform(values.begin(), values.end(), sq.begin(),
                 [m = s.mean](double v) { return (v - m) * (v - m); });
  s.std_dev = std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size()));
  return s;
}

}  // namespace metra
