#pragma once

// Monte Carlo harness for the coordinated-turn smoothing experiment: simulate
// trajectories in binary64, run the iterated smoother with the QR residual
// route ("proposed") and the downdate route ("reference") in binary32 and/or
// binary64, and record per-step error norms against the ground truth.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sqrtslr/ct_model.hpp"
#include "sqrtslr/cubature.hpp"

namespace sqrtslr::bench {

enum class Method { proposed, reference };
enum class Precision { binary32, binary64 };
enum class TrialStatus { ok, downdate_failure, numerical_failure };

std::string_view to_string(Method m);
std::string_view to_string(Precision p);
std::string_view to_string(TrialStatus s);
Method parse_method(std::string_view s);
Precision parse_precision(std::string_view s);
TrialStatus parse_status(std::string_view s);

/// Which cubature rule the estimators use: `cubature` (spherical-radial),
/// `gh:<order>` (tensor Gauss-Hermite) or `ut:<kappa>` (unscented).
struct RuleSpec {
  enum class Kind { spherical_radial, gauss_hermite, unscented };
  Kind kind = Kind::spherical_radial;
  int order = 3;
  double kappa = 0;

  static RuleSpec parse(std::string_view text);
  std::string str() const;

  template <typename Scalar>
  CubatureRule<Scalar> build(Index n) const {
    switch (kind) {
      case Kind::gauss_hermite:
        return gauss_hermite<Scalar>(n, order);
      case Kind::unscented:
        return unscented<Scalar>(n, Scalar(kappa));
      case Kind::spherical_radial:
        break;
    }
    return spherical_radial<Scalar>(n);
  }
};

struct ExperimentConfig {
  std::size_t trials = 100;
  std::size_t length = 101;
  std::size_t iterations = 10;
  std::vector<Method> methods{Method::proposed, Method::reference};
  std::vector<Precision> precisions{Precision::binary32, Precision::binary64};
  RuleSpec rule;
  std::uint64_t seed = 20240101;
  std::string output_path = "results.csv";
  ct::Sigma0Reading sigma0_reading = ct::Sigma0Reading::variance;
  ct::Params<double> params;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

struct ErrorNorms {
  double position = 0;
  double velocity = 0;
  double turn_rate = 0;
};

struct TrialRecord {
  std::size_t trial = 0;
  std::size_t time = 0;
  Method method = Method::proposed;
  Precision precision = Precision::binary64;
  std::optional<ErrorNorms> errors;  // present iff status == ok
  TrialStatus status = TrialStatus::ok;
  std::optional<std::size_t> failure_step;
};

/// Independent per-trial seed derived from the master seed by a counter-based
/// splitmix64 mix, so trial order and threading never matter.
std::uint64_t trial_seed(std::uint64_t master, std::size_t trial);

/// All records of one trial, for every configured (method, precision) cell.
std::vector<TrialRecord> run_trial(const ExperimentConfig& config, std::size_t trial);

/// Runs every trial (concurrently) and returns records sorted by
/// (trial, time, method, precision).
std::vector<TrialRecord> run_experiment(const ExperimentConfig& config);

void sort_records(std::vector<TrialRecord>& records);

struct AggregateRow {
  Method method = Method::proposed;
  Precision precision = Precision::binary64;
  std::size_t time = 0;
  std::optional<ErrorNorms> mean;  // absent when no trial was ok at this step
  std::size_t trials_ok = 0;
  std::size_t failures = 0;  // failed trials in the whole cell
};

/// Mean error norms per (method, precision, time) over trials that were ok,
/// with each cell's failure count. Throws EmptyInput on no records.
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records);

}  // namespace sqrtslr::bench
