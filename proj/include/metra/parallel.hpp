#pragma once

#include <cstddef>
#include <functional>

namespace metra {

// Number of worker threads used by element-parallel loops. Defaults to the
// hardware concurrency; results never depend on this value.
int num_threads();
void set_num_threads(int n);

// Calls body(i) for i in [0, n) split into contiguous chunks over the worker
// threads. body must only write to slots owned by i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace metra
