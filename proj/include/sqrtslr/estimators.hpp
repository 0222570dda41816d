#pragma once

// Square-root Gaussian filter and smoother driven by SLR linearization.
//
// Prediction and update share the same conditioning kernel: the prediction
// conditions x_{m-1} on x_m (yielding the predicted factor, the smoother gain
// and the backward covariance factor), the update conditions x_m on y_m.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqrtslr/cubature.hpp"
#include "sqrtslr/errors.hpp"
#include "sqrtslr/gaussian.hpp"
#include "sqrtslr/linalg.hpp"
#include "sqrtslr/slr.hpp"
#include "sqrtslr/types.hpp"

namespace sqrtslr {

/// x_m | x_{m-1} ~ N(f(x_{m-1}), Q(x_{m-1})),  y_m | x_m ~ N(c(x_m), R(x_m)).
template <typename Scalar>
struct StateSpaceModel {
  Index state_dim = 0;
  Index observation_dim = 0;
  VectorFunction<Scalar> transition_mean;
  NoiseModel<Scalar> transition_noise;
  VectorFunction<Scalar> observation_mean;
  NoiseModel<Scalar> observation_noise;
  /// Innovation y - y_hat. Defaults to plain subtraction when empty; models
  /// with angular observations supply a wrapped difference.
  std::function<Vector<Scalar>(const Vector<Scalar>&, const Vector<Scalar>&)> observation_residual;
};

/// Cubature rule and residual factorization shared by every SLR of a run.
template <typename Scalar>
class EstimatorOptions {
 public:
  explicit EstimatorOptions(CubatureRule<Scalar> rule, ResidualRoute route = ResidualRoute::qr)
      : rule_(std::move(rule)), route_(route) {
    if (auto check = check_assumption(rule_); !check) throw AssumptionViolated(check.reason);
  }

  const CubatureRule<Scalar>& rule() const noexcept { return rule_; }
  ResidualRoute route() const noexcept { return route_; }

 private:
  CubatureRule<Scalar> rule_;
  ResidualRoute route_;
};

/// Parameters of the backward density x_m | x_{m+1}, y_{1:m}:
/// mean offset + gain x_{m+1}, covariance factor cov_factor.
template <typename Scalar>
struct BackwardKernel {
  Matrix<Scalar> gain;
  Vector<Scalar> offset;
  TriangularFactor<Scalar> cov_factor;
};

template <typename Scalar>
struct Prediction {
  GaussianSqrt<Scalar> predicted;
  BackwardKernel<Scalar> kernel;
};

template <typename Scalar>
struct Correction {
  GaussianSqrt<Scalar> filtered;
  TriangularFactor<Scalar> innovation_factor;  // lower
};

/// filtered[0] is the initial density; filtered[m], predicted[m-1] and
/// kernels[m-1] belong to time m = 1..n.
template <typename Scalar>
struct FilterResult {
  std::vector<GaussianSqrt<Scalar>> filtered;
  std::vector<GaussianSqrt<Scalar>> predicted;
  std::vector<BackwardKernel<Scalar>> kernels;
};

/// One SLR of the transition about `linearization` (default: the posterior)
/// followed by a single block conditioning.
template <typename Scalar>
Prediction<Scalar> predict(const GaussianSqrt<Scalar>& posterior, const StateSpaceModel<Scalar>& model,
                           const EstimatorOptions<Scalar>& options,
                           const GaussianSqrt<Scalar>* linearization = nullptr) {
  const auto& about = linearization ? *linearization : posterior;
  const auto approx = statistical_linear_regression(model.transition_mean, model.transition_noise, about,
                                                    options.rule(), options.route());
  const auto cond = block_condition(posterior.cov_factor, approx.slope, approx.residual_factor);

  Prediction<Scalar> out;
  Vector<Scalar> predicted_mean = approx.slope * posterior.mean + approx.offset;
  out.kernel.offset = posterior.mean - cond.gain * predicted_mean;
  out.kernel.gain = cond.gain;
  out.kernel.cov_factor = cond.conditional_factor.as_lower();
  out.predicted = GaussianSqrt<Scalar>(std::move(predicted_mean), cond.marginal_factor);
  return out;
}

/// One SLR of the observation about `linearization` (default: the
/// prediction) followed by a single block conditioning.
template <typename Scalar>
Correction<Scalar> update(const GaussianSqrt<Scalar>& predicted, const Vector<Scalar>& observation,
                          const StateSpaceModel<Scalar>& model, const EstimatorOptions<Scalar>& options,
                          const GaussianSqrt<Scalar>* linearization = nullptr) {
  if (observation.size() != model.observation_dim) {
    throw DimensionMismatch("update: observation has size " + std::to_string(observation.size()));
  }
  if (!observation.allFinite()) throw NonFiniteImage("update: observation is not finite");
  const auto& about = linearization ? *linearization : predicted;
  const auto approx = statistical_linear_regression(model.observation_mean, model.observation_noise, about,
                                                    options.rule(), options.route());
  const auto cond = block_condition(predicted.cov_factor, approx.slope, approx.residual_factor);

  const Vector<Scalar> expected = approx.slope * predicted.mean + approx.offset;
  const Vector<Scalar> innovation =
      model.observation_residual ? model.observation_residual(observation, expected) : Vector<Scalar>(observation - expected);
  Correction<Scalar> out;
  out.filtered = GaussianSqrt<Scalar>(predicted.mean + cond.gain * innovation, cond.conditional_factor);
  out.innovation_factor = cond.marginal_factor.as_lower();
  return out;
}

/// Predict/update recursion over y_1..y_n starting from the density of x_0.
/// With `linearization` (length n + 1, indexed by time), the prediction into
/// time m linearizes about entry m - 1 and the update at m about entry m.
template <typename Scalar>
FilterResult<Scalar> filter_pass(const GaussianSqrt<Scalar>& init, std::span<const Vector<Scalar>> observations,
                                 const StateSpaceModel<Scalar>& model, const EstimatorOptions<Scalar>& options,
                                 const std::vector<GaussianSqrt<Scalar>>* linearization = nullptr) {
  const std::size_t n = observations.size();
  if (n == 0) throw EmptyInput("filter_pass: no observations");
  if (linearization && linearization->size() != n + 1) {
    throw DimensionMismatch("filter_pass: linearization trajectory must have n + 1 entries");
  }
  FilterResult<Scalar> out;
  out.filtered.reserve(n + 1);
  out.predicted.reserve(n);
  out.kernels.reserve(n);
  out.filtered.push_back(init);
  for (std::size_t m = 1; m <= n; ++m) {
    try {
      auto pred = predict(out.filtered.back(), model, options, linearization ? &(*linearization)[m - 1] : nullptr);
      auto corr = update(pred.predicted, observations[m - 1], model, options,
                         linearization ? &(*linearization)[m] : nullptr);
      out.predicted.push_back(std::move(pred.predicted));
      out.kernels.push_back(std::move(pred.kernel));
      out.filtered.push_back(std::move(corr.filtered));
    } catch (Error& e) {
      e.annotate_time(m);
      throw;
    }
  }
  return out;
}

/// Backward recursion through the kernels. The smoothed covariance
/// Sigma_b + Gamma S S* Gamma* is factored by one QR of the stacked factors.
template <typename Scalar>
std::vector<GaussianSqrt<Scalar>> smooth_pass(const std::vector<GaussianSqrt<Scalar>>& filtered,
                                              const std::vector<BackwardKernel<Scalar>>& kernels) {
  if (filtered.empty() || kernels.size() + 1 != filtered.size()) {
    throw DimensionMismatch("smooth_pass: expected one kernel per transition");
  }
  std::vector<GaussianSqrt<Scalar>> smoothed(filtered.size());
  smoothed.back() = filtered.back();
  for (std::size_t m = kernels.size(); m-- > 0;) {
    const auto& k = kernels[m];
    const auto& next = smoothed[m + 1];
    const Index n = next.dim();
    if (k.gain.rows() != filtered[m].dim() || k.gain.cols() != n) {
      throw DimensionMismatch("smooth_pass: kernel gain has wrong shape at time " + std::to_string(m));
    }
    Matrix<Scalar> pre(k.cov_factor.dim() + n, k.gain.rows());
    pre.topRows(k.cov_factor.dim()) = k.cov_factor.as_upper().matrix();
    pre.bottomRows(n) = next.cov_factor.matrix().transpose() * k.gain.transpose();
    smoothed[m] = GaussianSqrt<Scalar>(k.offset + k.gain * next.mean, triangularize(std::move(pre)));
  }
  return smoothed;
}

/// Iterated posterior linearization smoother with a fixed number of sweeps.
/// Sweep 1 linearizes about the running filter densities, later sweeps about
/// the previous sweep's smoothed marginals.
template <typename Scalar>
std::vector<GaussianSqrt<Scalar>> ipls(const GaussianSqrt<Scalar>& init, std::span<const Vector<Scalar>> observations,
                                       const StateSpaceModel<Scalar>& model, const EstimatorOptions<Scalar>& options,
                                       std::size_t iterations) {
  if (iterations < 1) throw ConfigError("ipls: at least one iteration required");
  std::vector<GaussianSqrt<Scalar>> smoothed;
  for (std::size_t it = 1; it <= iterations; ++it) {
    try {
      const auto pass = filter_pass(init, observations, model, options, it == 1 ? nullptr : &smoothed);
      smoothed = smooth_pass(pass.filtered, pass.kernels);
    } catch (Error& e) {
      e.annotate_iteration(it);
      throw;
    }
  }
  return smoothed;
}

}  // namespace sqrtslr
