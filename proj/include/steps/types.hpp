#pragma once

#include <Eigen/Dense>

namespace steps {

// Fields on the horizon chain are stored as H x d matrices: one row per
// horizon step, one column per channel.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace steps
