#pragma once

#include <Eigen/Dense>

namespace moselect {

using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = DenseMatrix<double>;
using Vector = DenseVector<double>;

// Rows are points, columns are objectives.
using PointMatrix = Matrix;

// One-hot model indicator (13 slots) followed by standardized
// hyperparameter values (15 slots).
inline constexpr int kModelSlots = 13;
inline constexpr int kFeatureSlots = 15;
inline constexpr int kInputDim = kModelSlots + kFeatureSlots;

using FeatureVector = Eigen::Matrix<double, kInputDim, 1>;

}  // namespace moselect
