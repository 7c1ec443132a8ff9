#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "hgp/errors.hpp"

namespace hgp {

/// Hyperparameters of an isotropic stationary kernel.
struct KernelParams {
  double lengthscale = 0.2;
  double variance = 1.0;

  void validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
      throw InvalidArgument("kernel lengthscale must be positive and finite");
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw InvalidArgument("kernel variance must be positive and finite");
  }
};

/// Closed interval [lower, upper] used as a hyperparameter box constraint.
struct Bounds {
  double lower;
  double upper;

  [[nodiscard]] bool contains(double v) const noexcept { return v >= lower && v <= upper; }

  void validate() const {
    if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper))
      throw InvalidArgument("bounds require finite lower < upper");
  }
};

namespace detail {
inline constexpr double kSqrt5 = 2.23606797749978969640917366873128;
}

/// Matern nu=5/2 covariance as a function of Euclidean distance r >= 0.
inline double matern52_radial(double r, const KernelParams& p) noexcept {
  const double a = detail::kSqrt5 * r / p.lengthscale;
  return p.variance * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

/// d k / d log(lengthscale) at distance r.
inline double matern52_radial_dlog_lengthscale(double r, const KernelParams& p) noexcept {
  const double a = detail::kSqrt5 * r / p.lengthscale;
  return p.variance * (a * a / 3.0) * (1.0 + a) * std::exp(-a);
}

inline double matern52(const Eigen::Ref<const Eigen::VectorXd>& x1, const Eigen::Ref<const Eigen::VectorXd>& x2,
                       const KernelParams& params) {
  if (x1.size() != x2.size() || x1.size() == 0) throw InvalidArgument("matern52: inputs must share a nonzero dimension");
  if (!x1.allFinite() || !x2.allFinite()) throw InvalidArgument("matern52: non-finite input");
  params.validate();
  return matern52_radial((x1 - x2).norm(), params);
}

/// Pairwise Euclidean distances between the rows of a (m x k) and b (n x k).
inline Eigen::MatrixXd pairwise_distances(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                          const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("pairwise_distances: dimension mismatch");
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) d(i, j) = (a.row(i) - b.row(j)).norm();
  return d;
}

/// K(a, b) with rows of a and b as points.
inline Eigen::MatrixXd cross_covariance(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                        const Eigen::Ref<const Eigen::MatrixXd>& b, const KernelParams& params) {
  Eigen::MatrixXd k = pairwise_distances(a, b);
  return k.unaryExpr([&params](double r) { return matern52_radial(r, params); });
}

/// K(X, X) + noise_var * I for the rows of X.
inline Eigen::MatrixXd gram_matrix(const Eigen::Ref<const Eigen::MatrixXd>& X, const KernelParams& params,
                                   double noise_var) {
  if (X.rows() < 1) throw InvalidArgument("gram_matrix: need at least one point");
  if (!X.allFinite()) throw InvalidArgument("gram_matrix: non-finite input");
  if (!(noise_var >= 0.0)) throw InvalidArgument("gram_matrix: noise variance must be nonnegative");
  params.validate();
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = params.variance + noise_var;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      k(i, j) = matern52_radial((X.row(i) - X.row(j)).norm(), params);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

// ---------------------------------------------------------------------------
// Standard normal helpers. Phi goes through erfc so that the lower tail keeps
// full relative precision.

inline double std_normal_pdf(double z) noexcept {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double std_normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// log Phi(z), accurate far into the lower tail.
inline double log_std_normal_cdf(double z) noexcept {
  if (z > -35.0) return std::log(std_normal_cdf(z));
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

/// phi(z) / Phi(z) (inverse Mills ratio), stable for very negative z.
inline double normal_pdf_cdf_ratio(double z) noexcept {
  if (z > -35.0) return std_normal_pdf(z) / std_normal_cdf(z);
  const double z2 = z * z;
  return -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
}

}  // namespace hgp
