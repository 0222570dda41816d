#pragma once

// Cubature rules for expectations under the standard Gaussian, and their
// transformation to N(mean, Pi) given a lower factor of Pi.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sqrtslr/errors.hpp"
#include "sqrtslr/linalg.hpp"
#include "sqrtslr/types.hpp"

namespace sqrtslr {

/// Weights w (length p) and standard-normal nodes Z (n x p, one node per
/// column). The flags are computed from the numbers, never asserted.
template <typename Scalar>
struct CubatureRule {
  Vector<Scalar> weights;
  Matrix<Scalar> nodes;
  bool degree2_exact = false;
  bool all_weights_positive = false;

  Index dim() const noexcept { return nodes.rows(); }
  Index size() const noexcept { return nodes.cols(); }

  static CubatureRule from_nodes(Vector<Scalar> w, Matrix<Scalar> z);

  template <typename Other>
  CubatureRule<Other> cast() const {
    return CubatureRule<Other>::from_nodes(weights.template cast<Other>(), nodes.template cast<Other>());
  }
};

/// Deviations of a rule's zeroth, first and second moments from those of the
/// standard Gaussian, and the tolerance they are judged against.
template <typename Scalar>
struct MomentDefects {
  Scalar weight_sum = 0;
  Scalar mean = 0;
  Scalar covariance = 0;
  Scalar weight_sum_tolerance = 0;
  Scalar moment_tolerance = 0;

  bool sums_to_one() const { return weight_sum <= weight_sum_tolerance; }
  bool mean_exact() const { return mean <= moment_tolerance; }
  bool covariance_exact() const { return covariance <= moment_tolerance; }
};

template <typename Scalar>
MomentDefects<Scalar> moment_defects(const Vector<Scalar>& w, const Matrix<Scalar>& z) {
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Index n = z.rows();
  const Index p = z.cols();
  MomentDefects<Scalar> out;
  out.weight_sum = std::abs(w.sum() - Scalar(1));
  out.mean = (z * w).cwiseAbs().maxCoeff();
  const Matrix<Scalar> second = z * w.asDiagonal() * z.transpose();
  out.covariance = (second - Matrix<Scalar>::Identity(n, n)).cwiseAbs().maxCoeff();
  out.weight_sum_tolerance = Scalar(8) * eps * Scalar(std::max<Index>(p, 1));
  Scalar scale = 0;
  for (Index i = 0; i < p; ++i) scale += std::abs(w(i)) * z.col(i).squaredNorm();
  out.moment_tolerance = Scalar(64) * eps * std::max(Scalar(1), scale);
  return out;
}

template <typename Scalar>
CubatureRule<Scalar> CubatureRule<Scalar>::from_nodes(Vector<Scalar> w, Matrix<Scalar> z) {
  if (w.size() != z.cols() || z.cols() == 0) {
    throw DimensionMismatch("cubature rule needs one weight per node and at least one node");
  }
  const auto defects = moment_defects(w, z);
  CubatureRule rule;
  rule.degree2_exact = defects.sums_to_one() && defects.mean_exact() && defects.covariance_exact();
  rule.all_weights_positive = w.minCoeff() > Scalar(0);
  rule.weights = std::move(w);
  rule.nodes = std::move(z);
  return rule;
}

/// Outcome of the positivity/exactness gate required by the downdate-free
/// residual factorization.
struct AssumptionCheck {
  bool passed = false;
  std::string reason;
  explicit operator bool() const noexcept { return passed; }
};

template <typename Scalar>
AssumptionCheck check_assumption(const CubatureRule<Scalar>& rule) {
  const auto defects = moment_defects(rule.weights, rule.nodes);
  if (!defects.sums_to_one()) {
    return {false, "not exact to degree 2: weights sum to " + std::to_string(double(rule.weights.sum()))};
  }
  if (!defects.mean_exact()) {
    return {false, "not exact to degree 2: first moment deviates from zero by " +
                       std::to_string(double(defects.mean))};
  }
  if (!defects.covariance_exact()) {
    return {false, "not exact to degree 2: second moment deviates from identity by " +
                       std::to_string(double(defects.covariance))};
  }
  if (!(rule.weights.minCoeff() > Scalar(0))) {
    return {false, "weights not all positive: minimum weight " +
                       std::to_string(double(rule.weights.minCoeff()))};
  }
  return {true, {}};
}

/// 2n nodes at +sqrt(n) e_i (i = 1..n) followed by -sqrt(n) e_i, weight 1/(2n).
template <typename Scalar>
CubatureRule<Scalar> spherical_radial(Index n) {
  if (n < 1) throw DimensionMismatch("spherical_radial: dimension must be >= 1");
  const Scalar radius = std::sqrt(Scalar(n));
  Matrix<Scalar> z(n, 2 * n);
  z << radius * Matrix<Scalar>::Identity(n, n), -radius * Matrix<Scalar>::Identity(n, n);
  Vector<Scalar> w = Vector<Scalar>::Constant(2 * n, Scalar(1) / Scalar(2 * n));
  return CubatureRule<Scalar>::from_nodes(std::move(w), std::move(z));
}

/// Unscented rule, center node first: weight kappa/(n+kappa) at the origin
/// and 1/(2(n+kappa)) at +-sqrt(n+kappa) e_i.
template <typename Scalar>
CubatureRule<Scalar> unscented(Index n, Scalar kappa) {
  if (n < 1) throw DimensionMismatch("unscented: dimension must be >= 1");
  const Scalar spread = Scalar(n) + kappa;
  if (!(spread > Scalar(0))) throw ConfigError("unscented: n + kappa must be positive");
  const Scalar radius = std::sqrt(spread);
  Matrix<Scalar> z = Matrix<Scalar>::Zero(n, 2 * n + 1);
  z.middleCols(1, n) = radius * Matrix<Scalar>::Identity(n, n);
  z.rightCols(n) = -radius * Matrix<Scalar>::Identity(n, n);
  Vector<Scalar> w = Vector<Scalar>::Constant(2 * n + 1, Scalar(1) / (Scalar(2) * spread));
  w(0) = kappa / spread;
  return CubatureRule<Scalar>::from_nodes(std::move(w), std::move(z));
}

/// Scaled unscented parameterization: lambda = alpha^2 (n + kappa) - n.
/// Only the mean weights are used, so beta plays no role here.
template <typename Scalar>
CubatureRule<Scalar> unscented_scaled(Index n, Scalar alpha, Scalar kappa) {
  const Scalar lambda = alpha * alpha * (Scalar(n) + kappa) - Scalar(n);
  return unscented<Scalar>(n, lambda);
}

namespace detail {

/// Eigenvalues (ascending) and squared first eigenvector components of the
/// symmetric tridiagonal Jacobi matrix with zero diagonal.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> golub_welsch(const Vector<Scalar>& off_diagonal) {
  const Index q = off_diagonal.size() + 1;
  Matrix<Scalar> jacobi = Matrix<Scalar>::Zero(q, q);
  for (Index k = 0; k + 1 < q; ++k) {
    jacobi(k, k + 1) = off_diagonal(k);
    jacobi(k + 1, k) = off_diagonal(k);
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(jacobi);
  return {solver.eigenvalues(), solver.eigenvectors().row(0).transpose().cwiseAbs2()};
}

/// Orthonormal probabilists' Hermite values p_0..p_q at x.
template <typename Scalar>
Vector<Scalar> hermite_orthonormal(Scalar x, Index q) {
  Vector<Scalar> p(q + 1);
  p(0) = 1;
  if (q >= 1) p(1) = x;
  for (Index k = 1; k < q; ++k) {
    p(k + 1) = (x * p(k) - std::sqrt(Scalar(k)) * p(k - 1)) / std::sqrt(Scalar(k + 1));
  }
  return p;
}

/// Symmetrizes a rule on a symmetric interval whose nodes are sorted.
template <typename Scalar>
void symmetrize(Vector<Scalar>& x, Vector<Scalar>& w) {
  const Index q = x.size();
  for (Index i = 0; i < q / 2; ++i) {
    const Index j = q - 1 - i;
    const Scalar node = (x(j) - x(i)) / Scalar(2);
    const Scalar weight = (w(i) + w(j)) / Scalar(2);
    x(i) = -node;
    x(j) = node;
    w(i) = weight;
    w(j) = weight;
  }
  if (q % 2 == 1) x(q / 2) = 0;
}

}  // namespace detail

/// One-dimensional probabilists' Gauss-Hermite rule of the given order,
/// ascending nodes, weights summing to one. Golub-Welsch followed by Newton
/// polishing of the nodes and Christoffel weights.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> gauss_hermite_1d(Index order) {
  if (order < 1) throw ConfigError("gauss_hermite: order must be >= 1");
  Vector<Scalar> off(order - 1);
  for (Index k = 0; k + 1 < order; ++k) off(k) = std::sqrt(Scalar(k + 1));
  auto [x, w] = detail::golub_welsch<Scalar>(off);
  for (Index i = 0; i < order; ++i) {
    for (int iter = 0; iter < 3; ++iter) {
      const Vector<Scalar> p = detail::hermite_orthonormal(x(i), order);
      const Scalar denom = std::sqrt(Scalar(order)) * p(order - 1);
      if (denom == Scalar(0)) break;
      x(i) -= p(order) / denom;
    }
    const Vector<Scalar> p = detail::hermite_orthonormal(x(i), order);
    w(i) = Scalar(1) / p.head(order).squaredNorm();
  }
  w /= w.sum();
  detail::symmetrize(x, w);
  return {x, w};
}

/// One-dimensional Gauss-Legendre rule on [-1, 1] (weights sum to 2),
/// ascending nodes.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> gauss_legendre_1d(Index order) {
  if (order < 1) throw ConfigError("gauss_legendre: order must be >= 1");
  Vector<Scalar> off(order - 1);
  for (Index k = 1; k < order; ++k) {
    off(k - 1) = Scalar(k) / std::sqrt(Scalar(4 * k * k - 1));
  }
  auto [x, w] = detail::golub_welsch<Scalar>(off);
  for (Index i = 0; i < order; ++i) {
    Scalar derivative = 0;
    for (int iter = 0; iter < 4; ++iter) {
      Scalar p_prev = 1, p = x(i);
      for (Index k = 1; k < order; ++k) {
        const Scalar next = (Scalar(2 * k + 1) * x(i) * p - Scalar(k) * p_prev) / Scalar(k + 1);
        p_prev = p;
        p = next;
      }
      derivative = Scalar(order) * (x(i) * p - p_prev) / (x(i) * x(i) - Scalar(1));
      if (derivative == Scalar(0)) break;
      x(i) -= p / derivative;
    }
    w(i) = Scalar(2) / ((Scalar(1) - x(i) * x(i)) * derivative * derivative);
  }
  w *= Scalar(2) / w.sum();
  detail::symmetrize(x, w);
  return {x, w};
}

inline constexpr Index kDefaultMaxCubatureNodes = Index(1) << 20;

/// Tensor product of 1-D Gauss-Hermite rules; the last axis varies fastest.
template <typename Scalar>
CubatureRule<Scalar> gauss_hermite(Index n, Index order, Index max_nodes = kDefaultMaxCubatureNodes) {
  if (n < 1) throw DimensionMismatch("gauss_hermite: dimension must be >= 1");
  if (order < 1) throw ConfigError("gauss_hermite: order must be >= 1");
  Index p = 1;
  for (Index k = 0; k < n; ++k) {
    if (p > max_nodes / order) {
      throw RuleTooLarge(std::to_string(order) + "^" + std::to_string(n) + " nodes exceeds cap " +
                         std::to_string(max_nodes));
    }
    p *= order;
  }
  const auto [x, w1] = gauss_hermite_1d<Scalar>(order);
  Matrix<Scalar> z(n, p);
  Vector<Scalar> w(p);
  std::vector<Index> digit(static_cast<std::size_t>(n), 0);
  for (Index col = 0; col < p; ++col) {
    Scalar weight = 1;
    for (Index k = 0; k < n; ++k) {
      z(k, col) = x(digit[k]);
      weight *= w1(digit[k]);
    }
    w(col) = weight;
    for (Index k = n - 1; k >= 0; --k) {
      if (++digit[k] < order) break;
      digit[k] = 0;
    }
  }
  return CubatureRule<Scalar>::from_nodes(std::move(w), std::move(z));
}

/// A rule moved to N(mean, Pi): centered columns Pi^{1/2} z_i, nodes
/// mean + Pi^{1/2} z_i, and the square roots of the weights.
template <typename Scalar>
struct TransformedNodes {
  Vector<Scalar> mean;
  Matrix<Scalar> centered;
  Matrix<Scalar> nodes;
  Vector<Scalar> weights;
  Vector<Scalar> weight_sqrt;

  Index size() const noexcept { return nodes.cols(); }
};

template <typename Scalar>
TransformedNodes<Scalar> transform(const CubatureRule<Scalar>& rule, const Vector<Scalar>& mean,
                                   const TriangularFactor<Scalar>& factor) {
  if (rule.dim() != mean.size() || factor.dim() != mean.size()) {
    throw DimensionMismatch("transform: rule dimension " + std::to_string(rule.dim()) + ", mean " +
                            std::to_string(mean.size()) + ", factor " + std::to_string(factor.dim()));
  }
  if (rule.weights.minCoeff() < Scalar(0)) {
    throw AssumptionViolated("negative cubature weight has no square root");
  }
  TransformedNodes<Scalar> out;
  out.mean = mean;
  out.centered = factor.as_lower().matrix().template triangularView<Eigen::Lower>() * rule.nodes;
  out.nodes = out.centered.colwise() + mean;
  out.weights = rule.weights;
  out.weight_sqrt = rule.weights.cwiseSqrt();
  return out;
}

}  // namespace sqrtslr
