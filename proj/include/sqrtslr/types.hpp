#pragma once

#include <functional>

#include <Eigen/Core>

namespace sqrtslr {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Deterministic, side-effect-free map between vector spaces.
template <typename Scalar>
using VectorFunction = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

}  // namespace sqrtslr
