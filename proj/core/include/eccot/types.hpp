#pragma once

#include <Eigen/Dense>

namespace eccot {

/// Dense row-major matrix used throughout; rows are the natural "record" axis
/// (one word, one topic, one document).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace eccot
