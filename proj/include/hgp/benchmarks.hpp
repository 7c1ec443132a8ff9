#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "hgp/errors.hpp"
#include "hgp/performance.hpp"
#include "hgp/random.hpp"

namespace hgp {

// ---------------------------------------------------------------------------
// Toy system: cos(8x) on [0, 1], undefined on the open band (0.215, 0.6).

struct ToySystem {
  static constexpr double kBandLower = 0.215;
  static constexpr double kBandUpper = 0.6;
};

inline PerformanceValue toy_g(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("toy_g: x must lie in [0, 1]");
  if (x > ToySystem::kBandLower && x < ToySystem::kBandUpper) return PerformanceValue::undefined();
  return PerformanceValue::of(std::cos(8.0 * x));
}

/// Measure of {x in [0,1] : cos(8x) < 0, x outside the band} = (0.215 - pi/16) + (1 - 5 pi/16).
inline double toy_pf_analytic() {
  return (ToySystem::kBandLower - std::numbers::pi / 16.0) + (1.0 - 5.0 * std::numbers::pi / 16.0);
}

// ---------------------------------------------------------------------------
// T-junction merge: an approaching car at x_a (m, behind the junction) with speed
// v_a (m/s); ego accelerates at a_ego. Output is the closest approach minus the
// safe distance, rescaled by 1/20; undefined when ego declines to merge.

struct TJunctionSystem {
  static constexpr double kXaMin = -100.0;
  static constexpr double kXaMax = 0.0;
  static constexpr double kVaMin = 10.0;
  static constexpr double kVaMax = 15.0;
  static constexpr double kDistanceThreshold = 20.0;
  static constexpr double kEgoAcceleration = 2.0;
  static constexpr double kSensorLimit = 60.0;
  static constexpr double kOutputScale = 20.0;

  static double closest_approach(double x_a, double v_a) {
    return std::max(-(x_a + v_a * v_a / (2.0 * kEgoAcceleration)), 0.0);
  }
};

inline PerformanceValue tjunction_g(double x_a, double v_a) {
  using T = TJunctionSystem;
  if (!(x_a >= T::kXaMin && x_a <= T::kXaMax)) throw InvalidArgument("tjunction_g: x_a must lie in [-100, 0]");
  if (!(v_a >= T::kVaMin && v_a <= T::kVaMax)) throw InvalidArgument("tjunction_g: v_a must lie in [10, 15]");
  const double d_min = T::closest_approach(x_a, v_a);
  if (d_min < T::kDistanceThreshold && std::abs(x_a) < T::kSensorLimit) return PerformanceValue::undefined();
  return PerformanceValue::of((d_min - T::kDistanceThreshold) / T::kOutputScale);
}

/// Failure probability of the T-junction model by 1-D quadrature over v_a of the
/// failing x_a interval length: x_a in (-(d_thr + v^2/(2a)), -x_lim] for v^2 > 2a(x_lim - d_thr).
inline double tjunction_pf_semi_analytic() {
  using T = TJunctionSystem;
  const double two_a = 2.0 * T::kEgoAcceleration;
  const double v_lo = std::sqrt(two_a * (T::kSensorLimit - T::kDistanceThreshold));
  // antiderivative of v^2/(2a) + d_thr - x_lim
  auto primitive = [&](double v) { return v * v * v / (3.0 * two_a) + (T::kDistanceThreshold - T::kSensorLimit) * v; };
  const double area = primitive(T::kVaMax) - primitive(v_lo);
  return area / ((T::kXaMax - T::kXaMin) * (T::kVaMax - T::kVaMin));
}

// ---------------------------------------------------------------------------

/// A system under test with a uniform input distribution on a box, exposed in
/// normalized [0,1]^k coordinates for the surrogate layer.
struct Benchmark {
  std::string name;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::function<PerformanceValue(const Eigen::VectorXd&)> physical_g;

  [[nodiscard]] Eigen::Index dimension() const noexcept { return lower.size(); }

  [[nodiscard]] Eigen::VectorXd to_physical(const Eigen::Ref<const Eigen::VectorXd>& unit) const {
    return lower + (upper - lower).cwiseProduct(unit);
  }

  [[nodiscard]] Eigen::VectorXd to_unit(const Eigen::Ref<const Eigen::VectorXd>& physical) const {
    return (physical - lower).cwiseQuotient(upper - lower);
  }

  /// g evaluated at a normalized input. Rounding at the box edge is clamped back inside.
  [[nodiscard]] PerformanceValue evaluate(const Eigen::Ref<const Eigen::VectorXd>& unit) const {
    if (unit.size() != dimension()) throw InvalidArgument("benchmark: input dimension mismatch");
    return physical_g(to_physical(unit).cwiseMax(lower).cwiseMin(upper));
  }

  /// One draw from p(x), normalized.
  [[nodiscard]] Eigen::VectorXd sample(Rng& rng) const {
    Eigen::VectorXd u(dimension());
    for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = uniform01(rng);
    return u;
  }
};

inline Benchmark toy_benchmark() {
  return {"toy", Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0),
          [](const Eigen::VectorXd& x) { return toy_g(x(0)); }};
}

inline Benchmark tjunction_benchmark() {
  using T = TJunctionSystem;
  return {"tjunction", Eigen::Vector2d(T::kXaMin, T::kVaMin), Eigen::Vector2d(T::kXaMax, T::kVaMax),
          [](const Eigen::VectorXd& x) { return tjunction_g(x(0), x(1)); }};
}

/// "toy" or "tjunction".
inline Benchmark benchmark_by_name(const std::string& name) {
  if (name == "toy") return toy_benchmark();
  if (name == "tjunction") return tjunction_benchmark();
  throw InvalidArgument("unknown benchmark '" + name + "' (expected toy or tjunction)");
}

struct MonteCarloEstimate {
  double pf;
  double std_error;
  std::uint64_t samples;
};

/// Plain Monte Carlo estimate of P(g(x) < 0 and g(x) defined) with its binomial standard error.
inline MonteCarloEstimate bruteforce_pf(const Benchmark& bench, std::uint64_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("bruteforce_pf: need at least one sample");
  Rng rng(seed);
  std::uint64_t failures = 0;
  Eigen::VectorXd u(bench.dimension());
  for (std::uint64_t i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = uniform01(rng);
    if (bench.evaluate(u).is_failure()) ++failures;
  }
  const double pf = static_cast<double>(failures) / static_cast<double>(n);
  return {pf, std::sqrt(pf * (1.0 - pf) / static_cast<double>(n)), n};
}

}  // namespace hgp
