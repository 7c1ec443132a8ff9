#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "hgp/errors.hpp"

namespace hgp {

/// Output of a system under test: a finite real safety margin, or Undefined.
///
/// Undefined is a distinct state rather than a NaN payload, so it can never leak
/// into arithmetic. A negative defined value is a failure; Undefined never is.
class PerformanceValue {
 public:
  static PerformanceValue undefined() noexcept { return PerformanceValue{}; }

  static PerformanceValue of(double value) {
    if (!std::isfinite(value)) throw InvalidArgument("performance value must be finite; use undefined()");
    PerformanceValue v;
    v.value_ = value;
    return v;
  }

  [[nodiscard]] bool is_defined() const noexcept { return value_.has_value(); }
  [[nodiscard]] bool is_failure() const noexcept { return value_.has_value() && *value_ < 0.0; }

  /// Throws std::bad_optional_access when undefined.
  [[nodiscard]] double value() const { return value_.value(); }

  friend bool operator==(const PerformanceValue&, const PerformanceValue&) = default;

 private:
  PerformanceValue() = default;
  std::optional<double> value_;
};

/// An evaluated input point (normalized coordinates) and its observed performance.
struct LabeledSample {
  Eigen::VectorXd x;
  PerformanceValue y;
};

}  // namespace hgp
