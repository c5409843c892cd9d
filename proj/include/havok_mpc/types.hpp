#pragma once

#include <Eigen/Dense>

namespace havok {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index  = Eigen::Index;

}  // namespace havok
