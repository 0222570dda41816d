#pragma once

// Planar coordinated-turn target with range/bearing measurements.
//
// State x = (p1, p2, v1, v2, omega). Between samples the turn rate in the
// drift is frozen at its value at the start of the interval, so that
//
//   d(p) = v dt,  d(v) = omega J v dt + B0 dw_p,  d(omega) = sigma_omega dw_omega
//
// is linear on each interval. The transition is then
// N(exp(A(omega) dt) x, Q(omega, dt)) with Q the noise Gramian.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sqrtslr/cubature.hpp"
#include "sqrtslr/errors.hpp"
#include "sqrtslr/estimators.hpp"
#include "sqrtslr/gaussian.hpp"
#include "sqrtslr/linalg.hpp"
#include "sqrtslr/slr.hpp"
#include "sqrtslr/types.hpp"

namespace sqrtslr::ct {

inline constexpr Index kStateDim = 5;
inline constexpr Index kObservationDim = 2;
inline constexpr Index kNoiseDim = 3;
inline constexpr Index kGramianNodes = 20;

/// How the initial covariance diagonal is interpreted.
enum class Sigma0Reading { variance, stddev };

template <typename Scalar>
struct Params {
  Scalar dt = 1;
  Scalar sigma_x = Scalar(0.03);
  Scalar sigma_y = Scalar(0.03);
  Scalar sigma_omega = Scalar(0.013);
  Scalar sigma_r = 10;
  Scalar sigma_theta = Scalar(0.0031);
  Vector<Scalar> mu0 = (Vector<Scalar>(kStateDim) << 1000, 1000, 300, 0, Scalar(-0.0523)).finished();
  Vector<Scalar> sigma0_diag =
      (Vector<Scalar>(kStateDim) << 10, 10, Scalar(3.162), Scalar(3.162), Scalar(0.316)).finished();

  void validate() const {
    for (Scalar s : {dt, sigma_x, sigma_y, sigma_omega, sigma_r, sigma_theta}) {
      if (!(s > Scalar(0)) || !std::isfinite(s)) throw ConfigError("coordinated-turn parameters must be positive");
    }
    if (mu0.size() != kStateDim || sigma0_diag.size() != kStateDim) {
      throw ConfigError("coordinated-turn prior must be 5-dimensional");
    }
    if (!(sigma0_diag.minCoeff() > Scalar(0))) throw ConfigError("initial covariance diagonal must be positive");
  }

  template <typename Other>
  Params<Other> cast() const {
    Params<Other> p;
    p.dt = Other(dt);
    p.sigma_x = Other(sigma_x);
    p.sigma_y = Other(sigma_y);
    p.sigma_omega = Other(sigma_omega);
    p.sigma_r = Other(sigma_r);
    p.sigma_theta = Other(sigma_theta);
    p.mu0 = mu0.template cast<Other>();
    p.sigma0_diag = sigma0_diag.template cast<Other>();
    return p;
  }
};

/// The drift matrix A(omega).
template <typename Scalar>
Matrix<Scalar> drift_matrix(Scalar omega) {
  Matrix<Scalar> a = Matrix<Scalar>::Zero(kStateDim, kStateDim);
  a(0, 2) = 1;
  a(1, 3) = 1;
  a(2, 3) = -omega;
  a(3, 2) = omega;
  return a;
}

/// Noise input matrix B: zeros for positions, diag(sigma_x, sigma_y), sigma_omega.
template <typename Scalar>
Matrix<Scalar> noise_input(const Params<Scalar>& params) {
  Matrix<Scalar> b = Matrix<Scalar>::Zero(kStateDim, kNoiseDim);
  b(2, 0) = params.sigma_x;
  b(3, 1) = params.sigma_y;
  b(4, 2) = params.sigma_omega;
  return b;
}

/// exp(A(omega) tau) in closed form.
template <typename Scalar>
Matrix<Scalar> transition_matrix(Scalar omega, Scalar tau) {
  const Scalar x = omega * tau;
  const Scalar c = std::cos(x);
  const Scalar s = std::sin(x);
  // tau * sin(x)/x and tau * (1 - cos x)/x, the latter via 2 sin^2(x/2).
  const Scalar half = std::sin(x / Scalar(2));
  const Scalar sin_int = x == Scalar(0) ? tau : s / omega;
  const Scalar cos_int = x == Scalar(0) ? Scalar(0) : Scalar(2) * half * half / omega;
  Matrix<Scalar> phi = Matrix<Scalar>::Identity(kStateDim, kStateDim);
  phi(0, 2) = sin_int;
  phi(0, 3) = -cos_int;
  phi(1, 2) = cos_int;
  phi(1, 3) = sin_int;
  phi(2, 2) = c;
  phi(2, 3) = -s;
  phi(3, 2) = s;
  phi(3, 3) = c;
  return phi;
}

namespace detail {

/// Gauss-Legendre nodes and weights mapped to [0, 1].
template <typename Scalar>
const std::pair<Vector<Scalar>, Vector<Scalar>>& unit_interval_rule() {
  static const auto rule = [] {
    auto [x, w] = gauss_legendre_1d<Scalar>(kGramianNodes);
    return std::pair<Vector<Scalar>, Vector<Scalar>>((x.array() + Scalar(1)) / Scalar(2), w / Scalar(2));
  }();
  return rule;
}

}  // namespace detail

/// Lower factor of Q(omega, dt) = int_0^dt exp(A s) B B* exp(A* s) ds. The
/// Gramian itself is never formed: the quadrature terms sqrt(v_i) B* exp(A* s_i)
/// are stacked and triangularized.
template <typename Scalar>
TriangularFactor<Scalar> process_noise_factor(Scalar omega, const Params<Scalar>& params) {
  const auto& [t, v] = detail::unit_interval_rule<Scalar>();
  const Matrix<Scalar> b = noise_input(params);
  Matrix<Scalar> pre(kGramianNodes * kNoiseDim, kStateDim);
  for (Index i = 0; i < kGramianNodes; ++i) {
    const Scalar tau = params.dt * (Scalar(1) - t(i));
    const Scalar scale = std::sqrt(v(i) * params.dt);
    pre.middleRows(i * kNoiseDim, kNoiseDim) = scale * (transition_matrix(omega, tau) * b).transpose();
  }
  return triangularize(std::move(pre)).adjoint();
}

template <typename Scalar>
struct Discretization {
  Matrix<Scalar> phi;
  TriangularFactor<Scalar> q_factor;
};

template <typename Scalar>
Discretization<Scalar> discretize(Scalar omega, const Params<Scalar>& params) {
  return {transition_matrix(omega, params.dt), process_noise_factor(omega, params)};
}

/// exp(A(omega(x)) dt) x with omega(x) the fifth component of x.
template <typename Scalar>
Vector<Scalar> transition_mean(const Vector<Scalar>& x, const Params<Scalar>& params) {
  return transition_matrix(x(4), params.dt) * x;
}

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar theta) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar w = std::remainder(theta, Scalar(2) * pi);
  if (w <= -pi) w += Scalar(2) * pi;
  return w;
}

/// Range and bearing (-pi, pi] of the position.
template <typename Scalar>
Vector<Scalar> observe(const Vector<Scalar>& x) {
  const Scalar r = std::hypot(x(0), x(1));
  if (!(r > Scalar(16) * std::numeric_limits<Scalar>::epsilon())) {
    throw OriginSingularity("bearing undefined at range " + std::to_string(double(r)));
  }
  Scalar theta = std::atan2(x(1), x(0));
  if (theta <= -std::numbers::pi_v<Scalar>) theta = std::numbers::pi_v<Scalar>;
  Vector<Scalar> y(kObservationDim);
  y << r, theta;
  return y;
}

/// Measurement residual with the bearing difference wrapped.
template <typename Scalar>
Vector<Scalar> observation_residual(const Vector<Scalar>& y, const Vector<Scalar>& expected) {
  Vector<Scalar> d = y - expected;
  d(1) = wrap_angle(d(1));
  return d;
}

template <typename Scalar>
StateSpaceModel<Scalar> make_model(const Params<Scalar>& params) {
  params.validate();
  StateSpaceModel<Scalar> model;
  model.state_dim = kStateDim;
  model.observation_dim = kObservationDim;
  model.transition_mean = [params](const Vector<Scalar>& x) { return transition_mean(x, params); };
  model.transition_noise = NoiseModel<Scalar>::state_dependent(
      kStateDim, [params](const Vector<Scalar>& x) { return process_noise_factor(x(4), params); });
  model.observation_mean = [](const Vector<Scalar>& x) { return observe(x); };
  model.observation_noise = NoiseModel<Scalar>::constant(
      TriangularFactor<Scalar>::diagonal((Vector<Scalar>(kObservationDim) << params.sigma_r, params.sigma_theta).finished()));
  model.observation_residual = [](const Vector<Scalar>& y, const Vector<Scalar>& e) {
    return observation_residual(y, e);
  };
  return model;
}

template <typename Scalar>
GaussianSqrt<Scalar> initial_density(const Params<Scalar>& params, Sigma0Reading reading = Sigma0Reading::variance) {
  params.validate();
  const Vector<Scalar> sd =
      reading == Sigma0Reading::variance ? Vector<Scalar>(params.sigma0_diag.cwiseSqrt()) : params.sigma0_diag;
  return GaussianSqrt<Scalar>(params.mu0, TriangularFactor<Scalar>::diagonal(sd));
}

template <typename Scalar>
struct Trajectory {
  std::vector<Vector<Scalar>> states;
  std::vector<Vector<Scalar>> observations;
};

/// Draws x_0 from the prior, then x_m from the discretized transition, with one
/// noisy range/bearing observation per state. Deterministic given the seed.
template <typename Scalar>
Trajectory<Scalar> simulate_trajectory(const Params<Scalar>& params, std::size_t length, std::uint64_t seed,
                                       Sigma0Reading reading = Sigma0Reading::variance) {
  if (length < 1) throw ConfigError("simulate_trajectory: length must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> normal(0, 1);
  auto draw = [&](Index n) {
    Vector<Scalar> z(n);
    for (Index i = 0; i < n; ++i) z(i) = normal(rng);
    return z;
  };
  const auto prior = initial_density(params, reading);
  Trajectory<Scalar> out;
  out.states.reserve(length);
  out.observations.reserve(length);
  Vector<Scalar> x = prior.mean + prior.cov_factor.matrix() * draw(kStateDim);
  for (std::size_t m = 0; m < length; ++m) {
    if (m > 0) {
      const auto step = discretize(x(4), params);
      x = step.phi * x + step.q_factor.matrix() * draw(kStateDim);
    }
    Vector<Scalar> y = observe(x);
    const Vector<Scalar> e = draw(kObservationDim);
    y(0) += params.sigma_r * e(0);
    y(1) = wrap_angle(y(1) + params.sigma_theta * e(1));
    out.states.push_back(x);
    out.observations.push_back(std::move(y));
  }
  return out;
}

}  // namespace sqrtslr::ct
