#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hgp/kernels.hpp"
#include "support/oracles.hpp"

namespace {

using hgp::KernelParams;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

TEST(Matern52, EqualsVarianceAtZeroDistance) {
  EXPECT_DOUBLE_EQ(hgp::matern52(vec({0.3}), vec({0.3}), {0.2, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(hgp::matern52(vec({0.3, 0.1}), vec({0.3, 0.1}), {0.05, 0.7}), 0.7);
}

TEST(Matern52, OneLengthscaleApartMatchesClosedForm) {
  const double expected = (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
  EXPECT_NEAR(expected, 0.52399, 5e-6);
  EXPECT_NEAR(hgp::matern52(vec({0.0}), vec({0.2}), {0.2, 1.0}), expected, 1e-15);
}

TEST(Matern52, SymmetricOnRandomPairs) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0), l(0.01, 1.0);
  for (int t = 0; t < 500; ++t) {
    const Eigen::VectorXd a = vec({u(rng), u(rng)}), b = vec({u(rng), u(rng)});
    const KernelParams p{l(rng), l(rng)};
    EXPECT_EQ(hgp::matern52(a, b, p), hgp::matern52(b, a, p));
    EXPECT_NEAR(hgp::matern52(a, b, p), oracle::matern((a - b).norm(), p.lengthscale, p.variance), 1e-14);
  }
}

TEST(Matern52, DecreasingInDistance) {
  const KernelParams p{0.2, 1.0};
  double prev = hgp::matern52_radial(0.0, p);
  for (int i = 1; i <= 2000; ++i) {
    const double k = hgp::matern52_radial(i * 1e-3, p);
    EXPECT_LT(k, prev);
    prev = k;
  }
}

TEST(Matern52, RejectsNonFiniteAndMismatchedInputs) {
  EXPECT_THROW((void)hgp::matern52(vec({NAN}), vec({0.0}), {}), hgp::InvalidArgument);
  EXPECT_THROW((void)hgp::matern52(vec({INFINITY}), vec({0.0}), {}), hgp::InvalidArgument);
  EXPECT_THROW((void)hgp::matern52(vec({0.0, 1.0}), vec({0.0}), {}), hgp::InvalidArgument);
  EXPECT_THROW((void)hgp::matern52(vec({0.0}), vec({0.0}), {0.0, 1.0}), hgp::InvalidArgument);
}

TEST(Matern52, LogLengthscaleDerivativeMatchesFiniteDifference) {
  for (double r : {0.0, 0.01, 0.1, 0.3, 1.0}) {
    const double l = 0.2, h = 1e-6;
    const double fd = (hgp::matern52_radial(r, {l * std::exp(h), 1.0}) - hgp::matern52_radial(r, {l * std::exp(-h), 1.0})) / (2 * h);
    EXPECT_NEAR(hgp::matern52_radial_dlog_lengthscale(r, {l, 1.0}), fd, 1e-8);
  }
}

TEST(GramMatrix, SinglePointCarriesNoise) {
  const Eigen::MatrixXd k = hgp::gram_matrix(Eigen::MatrixXd::Constant(1, 1, 0.4), {0.2, 1.0}, 0.005 * 0.005);
  ASSERT_EQ(k.rows(), 1);
  EXPECT_DOUBLE_EQ(k(0, 0), 1.000025);
}

TEST(GramMatrix, TwoPointsOffDiagonal) {
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 0.2;
  const Eigen::MatrixXd k = hgp::gram_matrix(X, {0.2, 1.0}, 0.0);
  EXPECT_NEAR(k(0, 1), 0.52399, 5e-6);
  EXPECT_EQ(k(0, 1), k(1, 0));
}

TEST(GramMatrix, DuplicateRowsWithoutNoiseAreSingular) {
  Eigen::MatrixXd X(2, 1);
  X << 0.5, 0.5;
  const Eigen::MatrixXd k = hgp::gram_matrix(X, {0.2, 1.0}, 0.0);
  EXPECT_EQ(k.determinant(), 0.0);
}

TEST(GramMatrix, DistinctPointsFactorizeWithTinyNoise) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd X(30, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    const Eigen::MatrixXd k = hgp::gram_matrix(X, {0.2, 1.0}, 1e-12 + 1e-8);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(k).info(), Eigen::Success);
  }
}

TEST(NormalCdf, KnownValues) {
  EXPECT_EQ(hgp::std_normal_cdf(0.0), 0.5);
  EXPECT_NEAR(hgp::std_normal_cdf(1.959964), 0.975, 1e-7);
  EXPECT_LT(hgp::std_normal_cdf(-8.0), 1e-14);
  EXPECT_GT(hgp::std_normal_cdf(-8.0), 0.0);
}

TEST(NormalCdf, ReflectionAndMonotonicity) {
  double prev = 0.0;
  for (int i = -4000; i <= 4000; ++i) {
    const double z = i * 2e-3;
    EXPECT_NEAR(hgp::std_normal_cdf(-z), 1.0 - hgp::std_normal_cdf(z), 1e-12);
    const double p = hgp::std_normal_cdf(z);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(NormalCdf, MatchesHighPrecisionReference) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int t = 0; t < 1000; ++t) {
    const double z = u(rng);
    EXPECT_NEAR(hgp::std_normal_cdf(z), oracle::normal_cdf_hp(z), 1e-10) << "z=" << z;
  }
}

TEST(NormalCdf, LogAndMillsRatioStayFiniteInTheTail) {
  for (double z : {-5.0, -20.0, -34.9, -35.1, -60.0, -1e3}) {
    const double lp = hgp::log_std_normal_cdf(z);
    EXPECT_TRUE(std::isfinite(lp));
    if (z > -37.0) EXPECT_NEAR(lp, std::log(oracle::normal_cdf_hp(z)), 1e-9 * std::abs(lp));
    const double r = hgp::normal_pdf_cdf_ratio(z);
    EXPECT_TRUE(std::isfinite(r));
    EXPECT_GT(r, -z);  // phi/Phi > -z for z < 0
  }
  // continuity across the branch switch
  EXPECT_NEAR(hgp::log_std_normal_cdf(-35.0 + 1e-9), hgp::log_std_normal_cdf(-35.0 - 1e-9), 1e-6);
  EXPECT_NEAR(hgp::normal_pdf_cdf_ratio(-35.0 + 1e-9), hgp::normal_pdf_cdf_ratio(-35.0 - 1e-9), 1e-6);
}

}  // namespace
