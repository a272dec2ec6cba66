// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace melvc {

/// Row-major so that a (rows*cols) buffer maps directly onto tensor files.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Index = Eigen::Index;

}  // namespace melvc
