#pragma once

#include <Eigen/Dense>

namespace metra {

// Small dense types sized at run time (dimension 1..3) with inline storage,
// so hot loops never touch the heap.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

}  // namespace metra
