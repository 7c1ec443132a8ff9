#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// Nothing here calls into the code under test except for plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "hgp/active_learning.hpp"
#include "hgp/gp_regression.hpp"
#include "hgp/surrogate.hpp"

namespace oracle {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Phi(z) in 50-digit arithmetic.
inline double normal_cdf_hp(double z) {
  using big = boost::multiprecision::cpp_bin_float_50;
  const big x = big(-z) / boost::multiprecision::sqrt(big(2));
  return static_cast<double>(big(0.5) * boost::math::erfc(x));
}

/// Matern-5/2 written out independently of the library.
inline double matern(double r, double l, double v) {
  const double a = std::sqrt(5.0) * r / l;
  return v * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double l, double v) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = matern((a.row(i) - b.row(j)).norm(), l, v);
  return k;
}

struct MeanVar {
  double mean;
  double var;
};

/// GP regression posterior on two 1-D points through the explicit 2x2 inverse.
inline MeanVar regression_2pt(double x1, double x2, double y1, double y2, double xq, double l, double v, double noise) {
  const double a = matern(0.0, l, v) + noise;
  const double b = matern(std::abs(x1 - x2), l, v);
  const double d = a;
  const double det = a * d - b * b;
  const double i11 = d / det, i12 = -b / det, i22 = a / det;
  const double k1 = matern(std::abs(xq - x1), l, v), k2 = matern(std::abs(xq - x2), l, v);
  const double w1 = k1 * i11 + k2 * i12, w2 = k1 * i12 + k2 * i22;
  return {w1 * y1 + w2 * y2, matern(0.0, l, v) - (w1 * k1 + w2 * k2)};
}

/// log N(y | 0, K + noise I) for two 1-D points, written out by hand.
inline double lml_2pt(double x1, double x2, double y1, double y2, double l, double v, double noise) {
  const double a = v + noise;
  const double b = matern(std::abs(x1 - x2), l, v);
  const double det = a * a - b * b;
  const double quad = (a * y1 * y1 - 2.0 * b * y1 * y2 + a * y2 * y2) / det;
  return -0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * kPi);
}

/// E[g(h)] for h ~ N(m, s2), by adaptive Gauss-Kronrod on m +- 12 sd.
inline double gaussian_expectation(const std::function<double(double)>& g, double m, double s2) {
  const double s = std::sqrt(s2);
  auto integrand = [&](double h) {
    const double z = (h - m) / s;
    return g(h) * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * kPi));
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, m - 12.0 * s, m + 12.0 * s, 15, 1e-13);
}

inline double probit(double f) { return 0.5 * std::erfc(-f / std::sqrt(2.0)); }

struct DenseEp {
  Eigen::MatrixXd K;
  Eigen::VectorXd tau, nu;
  Eigen::MatrixXd Sigma;
  Eigen::VectorXd mu;
};

/// Textbook EP with dense inverses and tilted moments by quadrature. Only for
/// a handful of points.
inline DenseEp dense_ep(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double l, double v, int sweeps = 200) {
  const Eigen::Index n = X.rows();
  DenseEp ep{gram(X, X, l, v), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), {}, Eigen::VectorXd::Zero(n)};
  ep.Sigma = ep.K;
  const Eigen::MatrixXd k_inv = ep.K.inverse();
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double cav_var = 1.0 / (1.0 / ep.Sigma(i, i) - ep.tau(i));
      const double cav_mean = cav_var * (ep.mu(i) / ep.Sigma(i, i) - ep.nu(i));
      const double yi = y(i);
      const double z0 = gaussian_expectation([yi](double h) { return probit(yi * h); }, cav_mean, cav_var);
      const double z1 = gaussian_expectation([yi](double h) { return h * probit(yi * h); }, cav_mean, cav_var);
      const double z2 = gaussian_expectation([yi](double h) { return h * h * probit(yi * h); }, cav_mean, cav_var);
      const double m_hat = z1 / z0;
      const double v_hat = z2 / z0 - m_hat * m_hat;
      ep.tau(i) = std::max(0.0, 1.0 / v_hat - 1.0 / cav_var);
      ep.nu(i) = m_hat / v_hat - cav_mean / cav_var;
      ep.Sigma = (k_inv + Eigen::MatrixXd(ep.tau.asDiagonal())).inverse();
      ep.mu = ep.Sigma * ep.nu;
    }
  }
  return ep;
}

/// p(y* = +1 | x*) from a dense EP fit, integrating the probit over the latent predictive.
inline double dense_ep_predict(const DenseEp& ep, const Eigen::MatrixXd& X, const Eigen::VectorXd& xq, double l, double v) {
  const Eigen::MatrixXd kq = gram(X, xq.transpose(), l, v);
  const Eigen::MatrixXd k_inv = ep.K.inverse();
  const Eigen::VectorXd a = k_inv * kq.col(0);
  const double mean = a.dot(ep.mu);
  const double var = v - kq.col(0).dot(a) + a.dot(ep.Sigma * a);
  return gaussian_expectation(probit, mean, var);
}

/// Average precision by counting: for each positive, precision among the items
/// ranked at or above it (higher score first, lower index first on ties).
inline double average_precision_bruteforce(const std::vector<bool>& truth, const std::vector<double>& scores) {
  const std::size_t n = truth.size();
  auto above = [&](std::size_t j, std::size_t i) { return scores[j] > scores[i] || (scores[j] == scores[i] && j <= i); };
  double sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!truth[i]) continue;
    ++positives;
    std::size_t ranked = 0, hits = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!above(j, i)) continue;
      ++ranked;
      if (truth[j]) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(ranked);
  }
  return sum / static_cast<double>(positives);
}

/// Surrogate scoring a regression posterior with p_nan pinned at zero.
class RegressionOnlySurrogate final : public hgp::Surrogate {
 public:
  explicit RegressionOnlySurrogate(hgp::RegressionPosterior post) : post_(std::move(post)) {}

  [[nodiscard]] Eigen::VectorXd failure_probs(const Eigen::Ref<const Eigen::MatrixXd>& points) const override {
    Eigen::VectorXd mean, sd;
    post_.predict(points, mean, sd);
    Eigen::VectorXd p(points.rows());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = hgp::regression_failure_prob(mean(i), sd(i));
    return p;
  }

  [[nodiscard]] const hgp::RegressionPosterior& posterior() const noexcept { return post_; }

 private:
  hgp::RegressionPosterior post_;
};

/// Test double that knows the true failure set exactly.
class PerfectSurrogate final : public hgp::Surrogate {
 public:
  explicit PerfectSurrogate(std::function<bool(const Eigen::VectorXd&)> fails) : fails_(std::move(fails)) {}

  [[nodiscard]] Eigen::VectorXd failure_probs(const Eigen::Ref<const Eigen::MatrixXd>& points) const override {
    Eigen::VectorXd p(points.rows());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = fails_(points.row(i).transpose()) ? 1.0 : 0.0;
    return p;
  }

 private:
  std::function<bool(const Eigen::VectorXd&)> fails_;
};

}  // namespace oracle
