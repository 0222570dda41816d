#pragma once

// Statistical linear regression (SLR) of a conditional mean a(u) against
// u ~ N(mean, Pi) using a cubature rule, with two ways of factoring the
// residual covariance
//
//   Omega_bar = Omega + dA W dA* - Psi Pi Psi*
//
// The QR route uses E = dA - Psi dU, for which Omega_bar = Omega + E W E*
// whenever the rule is exact to degree two, so only additions of Gram
// matrices are ever factored. The downdate route is the update-then-downdate
// baseline kept for comparison.

#include <cmath>
#include <string>
#include <utility>

#include "sqrtslr/cubature.hpp"
#include "sqrtslr/errors.hpp"
#include "sqrtslr/gaussian.hpp"
#include "sqrtslr/linalg.hpp"
#include "sqrtslr/types.hpp"

namespace sqrtslr {

enum class NoiseKind { constant, state_dependent };

/// Square-root noise covariance, either fixed or evaluated per node.
template <typename Scalar>
class NoiseModel {
 public:
  using FactorFunction = std::function<TriangularFactor<Scalar>(const Vector<Scalar>&)>;

  NoiseModel() = default;

  static NoiseModel constant(TriangularFactor<Scalar> factor) {
    NoiseModel m;
    m.kind_ = NoiseKind::constant;
    m.dim_ = factor.dim();
    m.constant_ = factor.as_lower();
    return m;
  }

  static NoiseModel state_dependent(Index dim, FactorFunction fn) {
    NoiseModel m;
    m.kind_ = NoiseKind::state_dependent;
    m.dim_ = dim;
    m.fn_ = std::move(fn);
    return m;
  }

  NoiseKind kind() const noexcept { return kind_; }
  Index dim() const noexcept { return dim_; }

  /// Lower factor of the noise covariance at u.
  TriangularFactor<Scalar> factor_at(const Vector<Scalar>& u) const {
    if (kind_ == NoiseKind::constant) return constant_;
    auto f = fn_(u).as_lower();
    if (f.dim() != dim_) throw DimensionMismatch("noise factor has the wrong dimension");
    return f;
  }

 private:
  NoiseKind kind_ = NoiseKind::constant;
  Index dim_ = 0;
  TriangularFactor<Scalar> constant_;
  FactorFunction fn_;
};

/// Moments of an SLR: mean image a_bar = A w, slope Psi, offset
/// b = a_bar - Psi u, centered images dA and residual nodes E = dA - Psi dU.
template <typename Scalar>
struct SlrMoments {
  Vector<Scalar> mean;
  Matrix<Scalar> slope;
  Vector<Scalar> offset;
  Matrix<Scalar> centered_images;
  Matrix<Scalar> residual_nodes;
};

/// Affine approximation a(u) ~ slope u + offset with residual covariance
/// factor, plus the intermediates it was built from.
template <typename Scalar>
struct AffineApprox {
  Matrix<Scalar> slope;
  Vector<Scalar> offset;
  Vector<Scalar> mean;
  TriangularFactor<Scalar> residual_factor;
  Matrix<Scalar> centered_images;
  Matrix<Scalar> residual_nodes;
};

enum class ResidualRoute { qr, downdate };

namespace detail {

template <typename Scalar>
void require_finite(const Matrix<Scalar>& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteImage(std::string(what) + " produced a non-finite value");
}

/// Columns sqrt(w_i) Omega^{1/2}(u_i), side by side (d x p*d).
template <typename Scalar>
Matrix<Scalar> weighted_noise_blocks(const TransformedNodes<Scalar>& nodes, const NoiseModel<Scalar>& noise) {
  const Index d = noise.dim();
  const Index p = nodes.size();
  Matrix<Scalar> blocks(d, p * d);
  for (Index i = 0; i < p; ++i) {
    const auto f = noise.factor_at(nodes.nodes.col(i));
    blocks.middleCols(i * d, d) = nodes.weight_sqrt(i) * f.matrix();
  }
  require_finite(blocks, "noise factor");
  return blocks;
}

/// Pre-array (Omega-part | G)* for a Gram term G = X W^{1/2}.
template <typename Scalar>
Matrix<Scalar> stacked_update(const Matrix<Scalar>& weighted, const TransformedNodes<Scalar>& nodes,
                              const NoiseModel<Scalar>& noise) {
  const Index d = weighted.rows();
  if (noise.dim() != d) {
    throw DimensionMismatch("noise dimension " + std::to_string(noise.dim()) + " vs output dimension " +
                            std::to_string(d));
  }
  if (noise.kind() == NoiseKind::constant) {
    Matrix<Scalar> pre(d + weighted.cols(), d);
    pre.topRows(d) = noise.factor_at(nodes.mean).matrix().transpose();
    pre.bottomRows(weighted.cols()) = weighted.transpose();
    return pre;
  }
  const Matrix<Scalar> blocks = weighted_noise_blocks(nodes, noise);
  Matrix<Scalar> pre(weighted.cols() + blocks.cols(), d);
  pre.topRows(weighted.cols()) = weighted.transpose();
  pre.bottomRows(blocks.cols()) = blocks.transpose();
  return pre;
}

}  // namespace detail

/// Evaluates `fn` at every node and regresses it on the prior. The slope
/// solves Psi Pi = dA W dU* through two triangular solves against the prior
/// factor; Pi^{-1} is never formed.
template <typename Scalar>
SlrMoments<Scalar> slr_moments(const TransformedNodes<Scalar>& nodes, const VectorFunction<Scalar>& fn,
                               const TriangularFactor<Scalar>& prior_factor) {
  const Index p = nodes.size();
  const Index n = nodes.mean.size();
  if (prior_factor.dim() != n) throw DimensionMismatch("slr_moments: prior factor does not match nodes");
  const auto lower = prior_factor.as_lower();
  const Scalar tol = detail::zero_pivot_tolerance(lower.matrix().cwiseAbs().maxCoeff());
  for (Index i = 0; i < n; ++i) {
    if (!(std::abs(lower(i, i)) > tol)) {
      throw SingularPrior("prior factor has a zero diagonal entry at index " + std::to_string(i));
    }
  }

  const Vector<Scalar> first = fn(nodes.nodes.col(0));
  const Index d = first.size();
  Matrix<Scalar> images(d, p);
  images.col(0) = first;
  for (Index i = 1; i < p; ++i) {
    Vector<Scalar> a = fn(nodes.nodes.col(i));
    if (a.size() != d) throw DimensionMismatch("slr_moments: function output size varies across nodes");
    images.col(i) = std::move(a);
  }
  detail::require_finite(images, "regression function");

  SlrMoments<Scalar> out;
  out.mean = images * nodes.weights;
  out.centered_images = images.colwise() - out.mean;
  const Matrix<Scalar> cross = out.centered_images * nodes.weights.asDiagonal() * nodes.centered.transpose();
  // Psi L L* = cross: first X L* = cross, then Psi L = X.
  const Matrix<Scalar> half = solve_right_triangular(cross, lower.adjoint());
  out.slope = solve_right_triangular(half, lower);
  out.offset = out.mean - out.slope * nodes.mean;
  out.residual_nodes = out.centered_images - out.slope * nodes.centered;
  return out;
}

/// Lower factor of Omega_bar = sum_i w_i Omega(u_i) + E W E*, by one QR of
/// the stacked square-root terms.
template <typename Scalar>
TriangularFactor<Scalar> residual_factor_qr(const Matrix<Scalar>& residual_nodes,
                                            const TransformedNodes<Scalar>& nodes,
                                            const NoiseModel<Scalar>& noise) {
  if (residual_nodes.cols() != nodes.size()) {
    throw DimensionMismatch("residual_factor_qr: one residual column per node expected");
  }
  const Matrix<Scalar> weighted = residual_nodes * nodes.weight_sqrt.asDiagonal();
  return triangularize(detail::stacked_update(weighted, nodes, noise)).adjoint();
}

/// Baseline: factor Omega + dA W dA* by QR, then remove Psi Pi Psi* with one
/// rank-one downdate per column of Psi Pi^{1/2}, left to right.
template <typename Scalar>
TriangularFactor<Scalar> residual_factor_downdate(const Matrix<Scalar>& centered_images,
                                                  const Matrix<Scalar>& slope,
                                                  const TriangularFactor<Scalar>& prior_factor,
                                                  const TransformedNodes<Scalar>& nodes,
                                                  const NoiseModel<Scalar>& noise) {
  if (centered_images.cols() != nodes.size()) {
    throw DimensionMismatch("residual_factor_downdate: one image column per node expected");
  }
  const Matrix<Scalar> weighted = centered_images * nodes.weight_sqrt.asDiagonal();
  auto factor = triangularize(detail::stacked_update(weighted, nodes, noise)).adjoint();
  const Matrix<Scalar> removed = slope * prior_factor.as_lower().matrix();
  for (Index j = 0; j < removed.cols(); ++j) {
    try {
      factor = rank_one_downdate(factor, Vector<Scalar>(removed.col(j)));
    } catch (const DowndateFailure& e) {
      throw DowndateFailure(e.pivot(), static_cast<std::size_t>(j));
    }
  }
  return factor;
}

/// Full SLR of `fn` with noise `noise` about the Gaussian `about`.
template <typename Scalar>
AffineApprox<Scalar> statistical_linear_regression(const VectorFunction<Scalar>& fn,
                                                   const NoiseModel<Scalar>& noise,
                                                   const GaussianSqrt<Scalar>& about,
                                                   const CubatureRule<Scalar>& rule,
                                                   ResidualRoute route = ResidualRoute::qr) {
  if (!(rule.degree2_exact && rule.all_weights_positive)) {
    throw AssumptionViolated(check_assumption(rule).reason);
  }
  const auto nodes = transform(rule, about.mean, about.cov_factor);
  auto moments = slr_moments(nodes, fn, about.cov_factor);
  AffineApprox<Scalar> out;
  out.residual_factor =
      route == ResidualRoute::qr
          ? residual_factor_qr(moments.residual_nodes, nodes, noise)
          : residual_factor_downdate(moments.centered_images, moments.slope, about.cov_factor, nodes, noise);
  out.slope = std::move(moments.slope);
  out.offset = std::move(moments.offset);
  out.mean = std::move(moments.mean);
  out.centered_images = std::move(moments.centered_images);
  out.residual_nodes = std::move(moments.residual_nodes);
  return out;
}

}  // namespace sqrtslr
