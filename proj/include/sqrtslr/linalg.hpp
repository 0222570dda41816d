#pragma once

// Dense kernels for square-root covariance arithmetic: triangularization of
// pre-arrays, the block conditioning step shared by measurement updates and
// predictions, right triangular solves and (for the downdate baseline only)
// rank-one Cholesky downdates.
//
// Every routine is generic over the scalar type and never mixes precisions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "sqrtslr/errors.hpp"
#include "sqrtslr/types.hpp"

namespace sqrtslr {

enum class Triangle { lower, upper };

/// Call counters for the kernels in this header. Counters are per thread so
/// concurrent Monte Carlo trials never contend or interfere.
struct KernelCounters {
  std::size_t triangularizations = 0;
  std::size_t right_solves = 0;
  std::size_t conditionings = 0;
  // Kernel calls issued from inside block_condition.
  std::size_t conditioning_triangularizations = 0;
  std::size_t conditioning_solves = 0;
  std::size_t downdates = 0;
};

inline KernelCounters& kernel_counters() {
  thread_local KernelCounters counters;
  return counters;
}

/// Square matrix certified to be a lower or upper Cholesky-type factor:
/// exact zeros on the wrong side of the diagonal, nonnegative diagonal.
template <typename Scalar>
class TriangularFactor {
 public:
  TriangularFactor() = default;

  static TriangularFactor lower(Matrix<Scalar> m) { return validated(std::move(m), Triangle::lower); }
  static TriangularFactor upper(Matrix<Scalar> m) { return validated(std::move(m), Triangle::upper); }

  /// Lower factor with the given diagonal (e.g. standard deviations).
  static TriangularFactor diagonal(const Vector<Scalar>& d) {
    return lower(Matrix<Scalar>(d.asDiagonal()));
  }

  static TriangularFactor identity(Index n) { return lower(Matrix<Scalar>::Identity(n, n)); }

  /// Lower Cholesky factor of a symmetric positive definite matrix.
  static TriangularFactor from_covariance(const Matrix<Scalar>& cov) {
    Eigen::LLT<Matrix<Scalar>> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("covariance has no Cholesky factor");
    }
    return lower(Matrix<Scalar>(llt.matrixL()));
  }

  const Matrix<Scalar>& matrix() const noexcept { return data_; }
  Triangle orientation() const noexcept { return orientation_; }
  Index dim() const noexcept { return data_.rows(); }
  Scalar operator()(Index i, Index j) const { return data_(i, j); }

  /// The same factor with the other orientation (the adjoint).
  TriangularFactor adjoint() const {
    return TriangularFactor(data_.transpose(),
                            orientation_ == Triangle::lower ? Triangle::upper : Triangle::lower);
  }

  TriangularFactor as_lower() const { return orientation_ == Triangle::lower ? *this : adjoint(); }
  TriangularFactor as_upper() const { return orientation_ == Triangle::upper ? *this : adjoint(); }

  /// The positive semidefinite matrix this factor represents.
  Matrix<Scalar> gram() const {
    if (orientation_ == Triangle::lower) return data_ * data_.transpose();
    return data_.transpose() * data_;
  }

  template <typename Other>
  TriangularFactor<Other> cast() const {
    return TriangularFactor<Other>::unchecked(data_.template cast<Other>(), orientation_);
  }

  /// Wraps a matrix already known to satisfy the invariants (kernel output).
  static TriangularFactor unchecked(Matrix<Scalar> m, Triangle t) {
    return TriangularFactor(std::move(m), t);
  }

  /// Whether the structural invariants hold exactly.
  static bool satisfies_invariants(const Matrix<Scalar>& m, Triangle t) {
    if (m.rows() != m.cols()) return false;
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = 0; i < m.rows(); ++i) {
        const bool wrong_side = t == Triangle::lower ? i < j : i > j;
        if (wrong_side && m(i, j) != Scalar(0)) return false;
      }
      if (!(m(j, j) >= Scalar(0))) return false;
    }
    return true;
  }

 private:
  TriangularFactor(Matrix<Scalar> m, Triangle t) : data_(std::move(m)), orientation_(t) {}

  static TriangularFactor validated(Matrix<Scalar> m, Triangle t) {
    if (!satisfies_invariants(m, t)) {
      throw InvalidFactor(std::string("matrix is not a ") +
                          (t == Triangle::lower ? "lower" : "upper") +
                          " triangular factor with nonnegative diagonal");
    }
    return TriangularFactor(std::move(m), t);
  }

  Matrix<Scalar> data_;
  Triangle orientation_ = Triangle::lower;
};

namespace detail {

template <typename Scalar>
Scalar zero_pivot_tolerance(Scalar max_abs_entry) {
  return Scalar(16) * std::numeric_limits<Scalar>::epsilon() * max_abs_entry;
}

/// Householder reduction of m to upper-trapezoidal form, in place. Only the
/// upper triangle of the leading min(rows, cols) rows is meaningful afterwards.
template <typename Scalar>
void householder_reduce(Matrix<Scalar>& m) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  const Index steps = std::min(rows, cols);
  Vector<Scalar> v(rows);
  for (Index k = 0; k < steps; ++k) {
    const Index len = rows - k;
    auto x = m.col(k).segment(k, len);
    const Scalar norm_x = x.norm();
    if (norm_x == Scalar(0)) continue;
    const Scalar alpha = x(0) >= Scalar(0) ? -norm_x : norm_x;
    auto head = v.head(len);
    head = x;
    head(0) -= alpha;
    const Scalar vtv = head.squaredNorm();
    if (vtv == Scalar(0)) continue;
    // Apply (I - 2 v v* / v*v) to the trailing columns.
    for (Index j = k + 1; j < cols; ++j) {
      auto col = m.col(j).segment(k, len);
      const Scalar s = Scalar(2) * head.dot(col) / vtv;
      col -= s * head;
    }
    m(k, k) = alpha;
    m.col(k).segment(k + 1, len - 1).setZero();
  }
}

}  // namespace detail

/// Upper-triangular T with T*T = M*M, computed by Householder QR of M without
/// forming the orthogonal factor. The result is cols(M) x cols(M) with a
/// nonnegative diagonal; wide inputs are padded with zero rows.
template <typename Scalar>
TriangularFactor<Scalar> triangularize(Matrix<Scalar> m) {
  ++kernel_counters().triangularizations;
  const Index cols = m.cols();
  detail::householder_reduce(m);
  const Index kept = std::min(m.rows(), cols);
  Matrix<Scalar> r = Matrix<Scalar>::Zero(cols, cols);
  r.topRows(kept) = m.topRows(kept).template triangularView<Eigen::Upper>();
  for (Index i = 0; i < kept; ++i) {
    if (r(i, i) < Scalar(0)) r.row(i) = -r.row(i);
  }
  return TriangularFactor<Scalar>::unchecked(std::move(r), Triangle::upper);
}

/// X with X * T = B for the triangular matrix T held by `factor`.
/// A diagonal entry with magnitude <= `zero_tolerance` counts as zero.
template <typename Scalar>
Matrix<Scalar> solve_right_triangular(const Matrix<Scalar>& b, const TriangularFactor<Scalar>& factor,
                                      Scalar zero_tolerance = Scalar(0)) {
  ++kernel_counters().right_solves;
  const auto& t = factor.matrix();
  if (b.cols() != t.rows()) {
    throw DimensionMismatch("right triangular solve: B has " + std::to_string(b.cols()) +
                            " columns, factor has dimension " + std::to_string(t.rows()));
  }
  for (Index i = 0; i < t.rows(); ++i) {
    if (!(std::abs(t(i, i)) > zero_tolerance)) {
      throw SingularMarginal("zero diagonal entry at index " + std::to_string(i));
    }
  }
  Matrix<Scalar> x = b;
  if (factor.orientation() == Triangle::lower) {
    t.template triangularView<Eigen::Lower>().template solveInPlace<Eigen::OnTheRight>(x);
  } else {
    t.template triangularView<Eigen::Upper>().template solveInPlace<Eigen::OnTheRight>(x);
  }
  return x;
}

/// Joint-to-conditional reparameterization of
///   u ~ N(u0, Pi),  v | u ~ N(Psi u, Omega)
/// into
///   v ~ N(Psi u0, P),  u | v ~ N(u0 + Gamma (v - Psi u0), Sigma).
template <typename Scalar>
struct ConditioningResult {
  TriangularFactor<Scalar> marginal_factor;     // upper factor of P
  Matrix<Scalar> gain;                          // Gamma
  TriangularFactor<Scalar> conditional_factor;  // upper factor of Sigma
  Matrix<Scalar> raw_gain;                      // Gamma * P^{1/2}
};

/// Triangularizes the pre-array
///
///   [ Omega^{*/2}          0         ]      [ P^{*/2}   raw_gain* ]
///   [ Pi^{*/2} Psi*     Pi^{*/2}     ]  ->  [    0      Sigma^{*/2} ]
///
/// with one QR and recovers the gain with one right triangular solve against
/// P^{1/2}. Factors may be passed in either orientation.
template <typename Scalar>
ConditioningResult<Scalar> block_condition(const TriangularFactor<Scalar>& prior_factor,
                                           const Matrix<Scalar>& map,
                                           const TriangularFactor<Scalar>& noise_factor) {
  const Index n = prior_factor.dim();
  const Index d = noise_factor.dim();
  if (map.rows() != d || map.cols() != n) {
    throw DimensionMismatch("block_condition: map is " + std::to_string(map.rows()) + "x" +
                            std::to_string(map.cols()) + ", expected " + std::to_string(d) + "x" +
                            std::to_string(n));
  }
  auto& counters = kernel_counters();
  const KernelCounters before = counters;
  ++counters.conditionings;

  const Matrix<Scalar> prior_upper = prior_factor.as_upper().matrix();
  Matrix<Scalar> pre = Matrix<Scalar>::Zero(d + n, d + n);
  pre.topLeftCorner(d, d) = noise_factor.as_upper().matrix();
  pre.bottomLeftCorner(n, d) = prior_upper * map.transpose();
  pre.bottomRightCorner(n, n) = prior_upper;
  const Scalar tolerance = detail::zero_pivot_tolerance(pre.cwiseAbs().maxCoeff());

  const auto post = triangularize(std::move(pre)).matrix();
  ConditioningResult<Scalar> out;
  out.marginal_factor = TriangularFactor<Scalar>::unchecked(post.topLeftCorner(d, d), Triangle::upper);
  out.conditional_factor =
      TriangularFactor<Scalar>::unchecked(post.bottomRightCorner(n, n), Triangle::upper);
  out.raw_gain = post.topRightCorner(d, n).transpose();
  out.gain = solve_right_triangular(out.raw_gain, out.marginal_factor.as_lower(), tolerance);

  counters.conditioning_triangularizations += counters.triangularizations - before.triangularizations;
  counters.conditioning_solves += counters.right_solves - before.right_solves;
  return out;
}

/// Lower factor of L L* - v v* by a sequence of hyperbolic rotations.
/// Throws DowndateFailure carrying the pivot index when a rotation would need
/// the square root of a nonpositive number.
template <typename Scalar>
TriangularFactor<Scalar> rank_one_downdate(const TriangularFactor<Scalar>& factor, Vector<Scalar> v) {
  ++kernel_counters().downdates;
  Matrix<Scalar> l = factor.as_lower().matrix();
  const Index n = l.rows();
  if (v.size() != n) {
    throw DimensionMismatch("rank_one_downdate: vector length " + std::to_string(v.size()) +
                            " vs factor dimension " + std::to_string(n));
  }
  for (Index k = 0; k < n; ++k) {
    const Scalar lkk = l(k, k);
    const Scalar hyp = (lkk - v(k)) * (lkk + v(k));
    if (!(hyp > Scalar(0)) || !(lkk > Scalar(0))) {
      throw DowndateFailure(static_cast<std::size_t>(k));
    }
    const Scalar r = std::sqrt(hyp);
    const Scalar c = r / lkk;
    const Scalar s = v(k) / lkk;
    l(k, k) = r;
    for (Index i = k + 1; i < n; ++i) {
      l(i, k) = (l(i, k) - s * v(i)) / c;
      v(i) = c * v(i) - s * l(i, k);
    }
  }
  return TriangularFactor<Scalar>::unchecked(std::move(l), Triangle::lower);
}

}  // namespace sqrtslr
