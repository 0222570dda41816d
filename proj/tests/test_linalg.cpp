#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "oracles/dense.hpp"
#include "sqrtslr/linalg.hpp"

using namespace sqrtslr;
using oracle::Mat;
using oracle::Vec;

namespace {

template <typename Scalar>
bool is_upper_with_nonneg_diag(const TriangularFactor<Scalar>& f) {
  return f.orientation() == Triangle::upper && TriangularFactor<Scalar>::satisfies_invariants(f.matrix(), Triangle::upper);
}

}  // namespace

TEST_CASE("triangularize: 3-4-5 column") {
  Mat m(2, 1);
  m << 3, 4;
  const auto t = triangularize(m);
  REQUIRE(t.dim() == 1);
  CHECK(t(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("triangularize: identity is a fixed point") {
  const auto t = triangularize<double>(Mat::Identity(2, 2));
  CHECK(t.matrix().isApprox(Mat::Identity(2, 2)));
  CHECK(is_upper_with_nonneg_diag(t));
}

TEST_CASE("triangularize: random tall matrix matches Gram + reference Cholesky") {
  std::mt19937_64 rng(11);
  const Mat m = oracle::random_matrix(rng, 6, 3);
  const Mat gram = m.transpose() * m;
  const auto t = triangularize(m);
  CHECK(is_upper_with_nonneg_diag(t));
  CHECK(oracle::rel_err(t.gram(), gram) <= 1e-12);
  // The nonnegative-diagonal factor is unique: it is the reference Cholesky factor.
  CHECK(oracle::rel_err(t.matrix(), oracle::cholesky(gram).transpose()) <= 1e-12);
}

TEST_CASE("triangularize: wide inputs are padded with zero rows") {
  std::mt19937_64 rng(12);
  const Mat m = oracle::random_matrix(rng, 2, 4);
  const auto t = triangularize(m);
  REQUIRE(t.dim() == 4);
  CHECK(is_upper_with_nonneg_diag(t));
  CHECK(t.matrix().bottomRows(2).isZero(0));
  CHECK(oracle::rel_err(t.gram(), m.transpose() * m) <= 1e-12);
}

TEST_CASE("triangularize: Gram identity within 64 eps ||M||^2 (property)") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> dim(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat m = oracle::random_matrix(rng, dim(rng), dim(rng));
    const auto t = triangularize(m);
    const double bound = 64 * std::numeric_limits<double>::epsilon() * m.squaredNorm();
    REQUIRE((t.gram() - m.transpose() * m).norm() <= bound);

    const Eigen::MatrixXf mf = m.cast<float>();
    const auto tf = triangularize<float>(mf);
    const float bound_f = 64 * std::numeric_limits<float>::epsilon() * mf.squaredNorm();
    REQUIRE((tf.gram() - mf.transpose() * mf).norm() <= bound_f);
  }
}

TEST_CASE("TriangularFactor rejects matrices violating its invariants") {
  Mat m(2, 2);
  m << 1, 0, 0.5, -1;
  CHECK_THROWS_AS(TriangularFactor<double>::lower(m), InvalidFactor);
  m(1, 1) = 1;
  CHECK_NOTHROW(TriangularFactor<double>::lower(m));
  CHECK_THROWS_AS(TriangularFactor<double>::upper(m), InvalidFactor);
  CHECK(TriangularFactor<double>::lower(m).adjoint().orientation() == Triangle::upper);
}

TEST_CASE("block_condition: scalar example") {
  const auto one = TriangularFactor<double>::identity(1);
  const auto r = block_condition(one, Mat(Mat::Identity(1, 1)), one);
  CHECK(r.marginal_factor(0, 0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(r.gain(0, 0) == doctest::Approx(0.5));
  CHECK(r.conditional_factor(0, 0) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("block_condition: zero map leaves the prior untouched") {
  std::mt19937_64 rng(21);
  const Mat pi = oracle::random_spd(rng, 3);
  const Mat omega = oracle::random_spd(rng, 2);
  const auto r = block_condition(TriangularFactor<double>::from_covariance(pi), Mat(Mat::Zero(2, 3)),
                                 TriangularFactor<double>::from_covariance(omega));
  CHECK(oracle::rel_err(r.marginal_factor.gram(), omega) <= 1e-14);
  CHECK(r.gain.isZero(0));
  CHECK(oracle::rel_err(r.conditional_factor.gram(), pi) <= 1e-14);
}

TEST_CASE("block_condition: random 3 -> 2 instance matches dense conditioning") {
  std::mt19937_64 rng(22);
  const Mat pi = oracle::random_spd(rng, 3);
  const Mat omega = oracle::random_spd(rng, 2);
  const Mat psi = oracle::random_matrix(rng, 2, 3);
  const auto dense = oracle::condition(pi, psi, omega);
  const auto r = block_condition(TriangularFactor<double>::from_covariance(pi), psi,
                                 TriangularFactor<double>::from_covariance(omega));
  CHECK(oracle::rel_err(r.marginal_factor.gram(), dense.marginal) <= 1e-11);
  CHECK(oracle::rel_err(r.gain, dense.gain) <= 1e-11);
  CHECK(oracle::rel_err(r.conditional_factor.gram(), dense.conditional) <= 1e-11);
}

TEST_CASE("block_condition: dense formulas on random SPD instances, dims 1-6 (property)") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = dim(rng), d = dim(rng);
    const Mat pi = oracle::random_spd(rng, n);
    const Mat omega = oracle::random_spd(rng, d);
    const Mat psi = oracle::random_matrix(rng, d, n);

    const auto dense = oracle::condition(pi, psi, omega);
    const auto r = block_condition(TriangularFactor<double>::from_covariance(pi), psi,
                                   TriangularFactor<double>::from_covariance(omega));
    REQUIRE(is_upper_with_nonneg_diag(r.marginal_factor));
    REQUIRE(is_upper_with_nonneg_diag(r.conditional_factor));
    REQUIRE(oracle::rel_err(r.marginal_factor.gram(), dense.marginal) <= 1e-10);
    REQUIRE(oracle::rel_err(r.gain, dense.gain) <= 1e-10);
    REQUIRE(oracle::rel_err(r.conditional_factor.gram(), dense.conditional) <= 1e-10);
    // Adjoint consistency of the gain with the raw gain.
    REQUIRE(oracle::rel_err(r.gain * r.marginal_factor.as_lower().matrix(), r.raw_gain) <= 1e-13);

    // Same instance in binary32, judged against the binary64 oracle of the cast inputs.
    const Eigen::MatrixXf pif = pi.cast<float>(), omf = omega.cast<float>(), psif = psi.cast<float>();
    const auto densef = oracle::condition(pif.cast<double>(), psif.cast<double>(), omf.cast<double>());
    const auto rf = block_condition(TriangularFactor<float>::from_covariance(pif), psif,
                                    TriangularFactor<float>::from_covariance(omf));
    REQUIRE(oracle::rel_err(rf.marginal_factor.gram().cast<double>(), densef.marginal) <= 1e-4);
    REQUIRE(oracle::rel_err(rf.gain.cast<double>(), densef.gain) <= 1e-4);
    REQUIRE(oracle::rel_err(rf.conditional_factor.gram().cast<double>(), densef.conditional) <= 1e-4);
  }
}

TEST_CASE("block_condition: one QR and one solve per call") {
  std::mt19937_64 rng(24);
  const auto before = kernel_counters();
  block_condition(TriangularFactor<double>::from_covariance(oracle::random_spd(rng, 4)), oracle::random_matrix(rng, 2, 4),
                  TriangularFactor<double>::from_covariance(oracle::random_spd(rng, 2)));
  const auto after = kernel_counters();
  CHECK(after.conditionings - before.conditionings == 1);
  CHECK(after.conditioning_triangularizations - before.conditioning_triangularizations == 1);
  CHECK(after.conditioning_solves - before.conditioning_solves == 1);
}

TEST_CASE("block_condition: singular marginal and shape errors") {
  const auto zero = TriangularFactor<double>::lower(Mat::Zero(1, 1));
  const auto one = TriangularFactor<double>::identity(1);
  CHECK_THROWS_AS(block_condition(one, Mat(Mat::Zero(1, 1)), zero), SingularMarginal);
  CHECK_THROWS_AS(block_condition(one, Mat(Mat::Zero(2, 1)), one), DimensionMismatch);
}

TEST_CASE("solve_right_triangular: examples") {
  std::mt19937_64 rng(31);
  const auto l = TriangularFactor<double>::from_covariance(oracle::random_spd(rng, 3));
  CHECK(solve_right_triangular(l.matrix(), l).isApprox(Mat::Identity(3, 3), 1e-14));

  Vec d(2);
  d << 2, 4;
  Mat b(1, 2);
  b << 2, 4;
  const Mat x = solve_right_triangular(b, TriangularFactor<double>::diagonal(d));
  CHECK(x(0, 0) == 1.0);
  CHECK(x(0, 1) == 1.0);

  const auto l4 = TriangularFactor<double>::from_covariance(oracle::random_spd(rng, 4));
  const Mat b4 = oracle::random_matrix(rng, 4, 4);
  CHECK((solve_right_triangular(b4, l4) * l4.matrix() - b4).norm() <= 1e-12 * b4.norm());
  CHECK((solve_right_triangular(b4, l4.adjoint()) * l4.adjoint().matrix() - b4).norm() <= 1e-12 * b4.norm());

  Vec z(2);
  z << 1, 0;
  CHECK_THROWS_AS(solve_right_triangular(b, TriangularFactor<double>::diagonal(z)), SingularMarginal);
  CHECK_THROWS_AS(solve_right_triangular(Mat(Mat::Ones(1, 3)), TriangularFactor<double>::diagonal(d)),
                  DimensionMismatch);
}

TEST_CASE("rank_one_downdate: examples") {
  const auto id = TriangularFactor<double>::identity(2);
  Vec v(2);
  v << 0.6, 0;
  const auto l = rank_one_downdate(id, v);
  CHECK(l(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(l(1, 1) == 1.0);
  CHECK(l(1, 0) == 0.0);

  v << 1.5, 0;
  try {
    rank_one_downdate(id, v);
    FAIL("expected DowndateFailure");
  } catch (const DowndateFailure& e) {
    CHECK(e.pivot() == 0);
    CHECK_FALSE(e.column().has_value());
  }
  v << 0.1, 1.0;
  try {
    rank_one_downdate(id, v);
    FAIL("expected DowndateFailure");
  } catch (const DowndateFailure& e) {
    CHECK(e.pivot() == 1);
  }
}

TEST_CASE("rank_one_downdate: random PD instances against dense subtraction (property)") {
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = dim(rng);
    const Mat s = oracle::random_spd(rng, n, 1e2, 1.0);
    const Vec v = 0.3 * oracle::random_vector(rng, n) / std::sqrt(double(n));  // ||v||^2 well below min eig
    const Mat target = s - v * v.transpose();
    REQUIRE(oracle::min_eigenvalue(target) > 0);
    const auto l = TriangularFactor<double>::from_covariance(s);
    const auto down = rank_one_downdate(l, v);
    REQUIRE(TriangularFactor<double>::satisfies_invariants(down.matrix(), Triangle::lower));
    REQUIRE(oracle::rel_err(down.gram(), target) <= 1e-12);
    REQUIRE(oracle::rel_err(down.matrix(), oracle::cholesky(target)) <= 1e-11);

    // Re-update by triangularizing [L' v]* recovers L L*.
    Mat stacked(n + 1, n);
    stacked.topRows(n) = down.matrix().transpose();
    stacked.bottomRows(1) = v.transpose();
    REQUIRE(oracle::rel_err(triangularize(stacked).gram(), s) <= 1e-12);
  }
}
