// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace emitter {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace emitter
