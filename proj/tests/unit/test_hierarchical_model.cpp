#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hgp/benchmarks.hpp"
#include "hgp/hierarchical_model.hpp"
#include "support/oracles.hpp"

namespace {

using hgp::LabeledSample;
using hgp::PerformanceValue;

std::vector<LabeledSample> toy_samples(std::initializer_list<double> xs) {
  std::vector<LabeledSample> s;
  for (double x : xs) s.push_back({Eigen::VectorXd::Constant(1, x), hgp::toy_g(x)});
  return s;
}

TEST(HierarchicalFailureProb, Examples) {
  EXPECT_EQ(hgp::hierarchical_failure_prob(0.0, 1.0, 0.0), 0.5);
  EXPECT_EQ(hgp::hierarchical_failure_prob(-2.0, 0.0, 0.0), 1.0);
  EXPECT_EQ(hgp::hierarchical_failure_prob(2.0, 0.0, 0.0), 0.0);
  EXPECT_EQ(hgp::hierarchical_failure_prob(0.0, 0.0, 0.0), 0.5);
  EXPECT_NEAR(hgp::hierarchical_failure_prob(-2.0, 1e-300, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(hgp::hierarchical_failure_prob(-1.0, 1.0, 0.5), 0.420673, 1e-6);
  EXPECT_NEAR(hgp::misclassification_from_failure_prob(hgp::hierarchical_failure_prob(2.0, 1.0, 0.0)), 0.02275, 1e-5);
  EXPECT_EQ(hgp::hierarchical_failure_prob(-3.0, 0.5, 1.0), 0.0);
  EXPECT_EQ(hgp::misclassification_from_failure_prob(0.5), 0.5);
}

TEST(HierarchicalFailureProb, BoundedByDefinedProbability) {
  std::mt19937_64 rng(201);
  std::uniform_real_distribution<double> m(-3.0, 3.0), s(0.0, 2.0), p(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const double pn = p(rng);
    const double f = hgp::hierarchical_failure_prob(m(rng), s(rng), pn);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0 - pn);
    const double mis = hgp::misclassification_from_failure_prob(f);
    EXPECT_GE(mis, 0.0);
    EXPECT_LE(mis, 0.5);
  }
}

TEST(HierarchicalFailureProb, ReducesToUCriterionWithoutUndefinedMass) {
  std::mt19937_64 rng(203);
  std::uniform_real_distribution<double> m(-3.0, 3.0), s(0.01, 2.0);
  for (int t = 0; t < 10000; ++t) {
    const double mu = m(rng), sd = s(rng);
    const double mis = hgp::misclassification_from_failure_prob(hgp::hierarchical_failure_prob(mu, sd, 0.0));
    EXPECT_NEAR(mis, oracle::normal_cdf_hp(-std::abs(mu) / sd), 1e-12);
  }
}

TEST(Surrogate, ClassificationUsesStrictThreshold) {
  struct Constant final : hgp::Surrogate {
    double p;
    explicit Constant(double v) : p(v) {}
    Eigen::VectorXd failure_probs(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
      return Eigen::VectorXd::Constant(x.rows(), p);
    }
  };
  EXPECT_FALSE(Constant(0.5).classify_failure(Eigen::VectorXd::Zero(1)));
  EXPECT_TRUE(Constant(0.51).classify_failure(Eigen::VectorXd::Zero(1)));
  EXPECT_EQ(Constant(0.7).misclassification_prob(Eigen::VectorXd::Zero(1)), 1.0 - 0.7);
}

TEST(HierarchicalSurrogate, AllDefinedGivesLowUndefinedProbability) {
  const auto s = hgp::HierarchicalSurrogate::build(toy_samples({0.0, 0.1, 0.15, 0.2, 0.65, 0.8, 0.9, 1.0}), {});
  EXPECT_EQ(s.undefined_count(), 0u);
  for (double x : {0.0, 0.1, 0.2, 0.7, 1.0}) EXPECT_LT(s.nan_prob(Eigen::VectorXd::Constant(1, x)), 0.5);
}

TEST(HierarchicalSurrogate, LearnsTheUndefinedBand) {
  const auto s = hgp::HierarchicalSurrogate::build(toy_samples({0.02, 0.1, 0.18, 0.21, 0.25, 0.3, 0.4, 0.5, 0.55, 0.62, 0.75, 0.9}), {});
  EXPECT_EQ(s.defined_count(), 7u);
  EXPECT_EQ(s.undefined_count(), 5u);
  EXPECT_EQ(s.regression().size(), 7);
  EXPECT_EQ(s.nan_classifier().size(), 12);
  EXPECT_GT(s.nan_prob(Eigen::VectorXd::Constant(1, 0.4)), 0.5);
  EXPECT_LT(s.nan_prob(Eigen::VectorXd::Constant(1, 0.1)), 0.5);
  EXPECT_TRUE(s.classify_failure(Eigen::VectorXd::Constant(1, 0.21)));
  EXPECT_FALSE(s.classify_failure(Eigen::VectorXd::Constant(1, 0.4)));
  EXPECT_FALSE(s.classify_failure(Eigen::VectorXd::Constant(1, 0.05)));
}

TEST(HierarchicalSurrogate, SingleDefinedSampleIsEnough) {
  std::vector<LabeledSample> samples = toy_samples({0.3, 0.4, 0.5});
  samples.push_back({Eigen::VectorXd::Constant(1, 0.9), PerformanceValue::of(-0.4)});
  const auto s = hgp::HierarchicalSurrogate::build(samples, {});
  EXPECT_EQ(s.defined_count(), 1u);
  EXPECT_NEAR(s.regression().predict(Eigen::VectorXd::Constant(1, 0.9)).mean, -0.4, 1e-3);
}

TEST(HierarchicalSurrogate, NoDefinedSampleIsUnbuildable) {
  EXPECT_THROW((void)hgp::HierarchicalSurrogate::build(toy_samples({0.3, 0.4}), {}), hgp::UnbuildableSurrogate);
  EXPECT_THROW((void)hgp::HierarchicalSurrogate::build({}, {}), hgp::InvalidArgument);
}

TEST(HierarchicalSurrogate, BatchedProbabilitiesMatchTheFactorization) {
  const auto s = hgp::HierarchicalSurrogate::build(toy_samples({0.02, 0.1, 0.18, 0.25, 0.4, 0.55, 0.62, 0.75, 0.9}), {});
  Eigen::MatrixXd Q(200, 1);
  for (Eigen::Index i = 0; i < 200; ++i) Q(i, 0) = i / 199.0;
  const Eigen::VectorXd p = s.failure_probs(Q);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const auto pr = s.regression().predict(Q.row(i).transpose());
    const double pn = s.nan_prob(Q.row(i).transpose());
    EXPECT_NEAR(p(i), hgp::hierarchical_failure_prob(pr.mean, pr.std_dev, pn), 1e-12);
    EXPECT_LE(p(i), 1.0 - pn + 1e-15);
  }
}

}  // namespace
