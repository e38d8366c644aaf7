#pragma once

#include <Eigen/Core>

namespace sphconv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace sphconv
