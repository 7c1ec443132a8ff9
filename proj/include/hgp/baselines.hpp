#pragma once

#include <span>

#include "hgp/surrogate.hpp"

namespace hgp {

/// Plain AK-MCS regression surrogate where undefined outputs are replaced by a
/// positive constant before fitting.
class MaskedSurrogate final : public Surrogate {
 public:
  static MaskedSurrogate build(std::span<const LabeledSample> samples, double alpha, const SurrogateConfig& config) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("mask value alpha must be positive");
    RegressionDataset data{detail::stack_inputs(samples), masked_targets(samples, alpha)};
    return MaskedSurrogate(alpha, fit(data, config.regression_bounds, config.noise_var, config.regression_fit),
                           config.predictive_includes_noise);
  }

  static Eigen::VectorXd masked_targets(std::span<const LabeledSample> samples, double alpha) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
      y(static_cast<Eigen::Index>(i)) = samples[i].y.is_defined() ? samples[i].y.value() : alpha;
    return y;
  }

  [[nodiscard]] Eigen::VectorXd failure_probs(const Eigen::Ref<const Eigen::MatrixXd>& points) const override {
    Eigen::VectorXd mean, sd;
    regression_.predict(points, mean, sd, include_noise_);
    Eigen::VectorXd p(points.rows());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = regression_failure_prob(mean(i), sd(i));
    return p;
  }

  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] const RegressionPosterior& regression() const noexcept { return regression_; }

 private:
  MaskedSurrogate(double alpha, RegressionPosterior regression, bool include_noise)
      : alpha_(alpha), regression_(std::move(regression)), include_noise_(include_noise) {}

  double alpha_;
  RegressionPosterior regression_;
  bool include_noise_;
};

/// GP classifier trained directly on the failure event (y defined and y < 0).
class GpcSurrogate final : public Surrogate {
 public:
  static GpcSurrogate build(std::span<const LabeledSample> samples, const SurrogateConfig& config) {
    ClassificationDataset data{detail::stack_inputs(samples), failure_labels(samples)};
    return GpcSurrogate(fit_ep_lengthscale(data, config.gpc_variance, config.gpc_lengthscale, config.ep));
  }

  /// +1 for an observed failure, -1 otherwise (undefined is never a failure).
  static Eigen::VectorXd failure_labels(std::span<const LabeledSample> samples) {
    Eigen::VectorXd labels(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
      labels(static_cast<Eigen::Index>(i)) = samples[i].y.is_failure() ? 1.0 : -1.0;
    return labels;
  }

  [[nodiscard]] Eigen::VectorXd failure_probs(const Eigen::Ref<const Eigen::MatrixXd>& points) const override {
    return classifier_.predict_probs(points);
  }

  [[nodiscard]] const EPPosterior& classifier() const noexcept { return classifier_; }

 private:
  explicit GpcSurrogate(EPPosterior classifier) : classifier_(std::move(classifier)) {}

  EPPosterior classifier_;
};

}  // namespace hgp
