#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace sqrtslr {

/// Base class of every error raised by the library. Estimator passes attach
/// the time index and smoother iteration at which the error surfaced.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message)
      : std::runtime_error(message), message_(message), full_(message) {}

  const char* what() const noexcept override { return full_.c_str(); }

  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> time_index() const noexcept { return time_index_; }
  std::optional<std::size_t> iteration() const noexcept { return iteration_; }

  void annotate_time(std::size_t m) {
    if (!time_index_) {
      time_index_ = m;
      rebuild();
    }
  }

  void annotate_iteration(std::size_t k) {
    if (!iteration_) {
      iteration_ = k;
      rebuild();
    }
  }

 private:
  void rebuild() {
    full_ = message_;
    if (time_index_) full_ += " [time " + std::to_string(*time_index_) + "]";
    if (iteration_) full_ += " [iteration " + std::to_string(*iteration_) + "]";
  }

  std::string message_;
  std::string full_;
  std::optional<std::size_t> time_index_;
  std::optional<std::size_t> iteration_;
};

#define SQRTSLR_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(#Name ": " + message) {} \
  }

SQRTSLR_DEFINE_ERROR(DimensionMismatch);
SQRTSLR_DEFINE_ERROR(InvalidFactor);
SQRTSLR_DEFINE_ERROR(NotPositiveDefinite);
SQRTSLR_DEFINE_ERROR(SingularMarginal);
SQRTSLR_DEFINE_ERROR(SingularPrior);
SQRTSLR_DEFINE_ERROR(NonFiniteImage);
SQRTSLR_DEFINE_ERROR(AssumptionViolated);
SQRTSLR_DEFINE_ERROR(RuleTooLarge);
SQRTSLR_DEFINE_ERROR(OriginSingularity);
SQRTSLR_DEFINE_ERROR(ConfigError);
SQRTSLR_DEFINE_ERROR(EmptyInput);

#undef SQRTSLR_DEFINE_ERROR

/// A hyperbolic rotation in a rank-one Cholesky downdate needed the square
/// root of a nonpositive number.
class DowndateFailure : public Error {
 public:
  explicit DowndateFailure(std::size_t pivot)
      : Error(describe(pivot, std::nullopt)), pivot_(pivot) {}
  DowndateFailure(std::size_t pivot, std::size_t column)
      : Error(describe(pivot, column)), pivot_(pivot), column_(column) {}

  /// Row of the factor at which the hypotenuse became nonpositive.
  std::size_t pivot() const noexcept { return pivot_; }
  /// Which downdate vector (left-to-right) failed, when part of a sequence.
  std::optional<std::size_t> column() const noexcept { return column_; }

 private:
  static std::string describe(std::size_t pivot, std::optional<std::size_t> column) {
    std::string s = "DowndateFailure: nonpositive hypotenuse at pivot " + std::to_string(pivot);
    if (column) s += " of downdate column " + std::to_string(*column);
    return s;
  }

  std::size_t pivot_;
  std::optional<std::size_t> column_;
};

}  // namespace sqrtslr
