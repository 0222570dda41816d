#pragma once

#include <utility>

#include "sqrtslr/errors.hpp"
#include "sqrtslr/linalg.hpp"
#include "sqrtslr/types.hpp"

namespace sqrtslr {

/// Gaussian density held as a mean and a lower covariance factor.
template <typename Scalar>
struct GaussianSqrt {
  Vector<Scalar> mean;
  TriangularFactor<Scalar> cov_factor;

  GaussianSqrt() = default;
  GaussianSqrt(Vector<Scalar> m, TriangularFactor<Scalar> f)
      : mean(std::move(m)), cov_factor(f.as_lower()) {
    if (mean.size() != cov_factor.dim()) {
      throw DimensionMismatch("GaussianSqrt: mean and factor dimensions differ");
    }
  }

  Index dim() const noexcept { return mean.size(); }
  Matrix<Scalar> covariance() const { return cov_factor.gram(); }

  template <typename Other>
  GaussianSqrt<Other> cast() const {
    return GaussianSqrt<Other>(mean.template cast<Other>(), cov_factor.template cast<Other>());
  }
};

}  // namespace sqrtslr
