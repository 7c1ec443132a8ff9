#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hgp/surrogate.hpp"

namespace hgp {

/// p(y < 0, y defined | x) = Phi(-mean / std) * (1 - p_nan).
inline double hierarchical_failure_prob(double mean, double std_dev, double p_nan) noexcept {
  return regression_failure_prob(mean, std_dev) * (1.0 - p_nan);
}

/// Hierarchical surrogate: a GP classifier for "is the output undefined?" gating
/// a GP regression fitted on the defined outputs only.
class HierarchicalSurrogate final : public Surrogate {
 public:
  /// Throws UnbuildableSurrogate when no sample is defined.
  static HierarchicalSurrogate build(std::span<const LabeledSample> samples, const SurrogateConfig& config) {
    if (samples.empty()) throw InvalidArgument("hierarchical surrogate: no samples");
    const Eigen::MatrixXd X = detail::stack_inputs(samples);

    std::vector<Eigen::Index> defined;
    Eigen::VectorXd labels(X.rows());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const bool is_defined = samples[i].y.is_defined();
      labels(static_cast<Eigen::Index>(i)) = is_defined ? -1.0 : 1.0;
      if (is_defined) defined.push_back(static_cast<Eigen::Index>(i));
    }
    if (defined.empty()) throw UnbuildableSurrogate("hierarchical surrogate needs at least one defined sample");

    RegressionDataset reg{X(defined, Eigen::all), Eigen::VectorXd(static_cast<Eigen::Index>(defined.size()))};
    for (std::size_t j = 0; j < defined.size(); ++j)
      reg.y(static_cast<Eigen::Index>(j)) = samples[static_cast<std::size_t>(defined[j])].y.value();

    RegressionPosterior regression = fit(reg, config.regression_bounds, config.noise_var, config.regression_fit);
    EPPosterior classifier = fit_ep_lengthscale(ClassificationDataset{X, labels}, config.nan_classifier_variance,
                                                config.nan_classifier_lengthscale, config.ep);
    return HierarchicalSurrogate(std::move(regression), std::move(classifier), defined.size(),
                                 samples.size() - defined.size(), config.predictive_includes_noise);
  }

  [[nodiscard]] Eigen::VectorXd failure_probs(const Eigen::Ref<const Eigen::MatrixXd>& points) const override {
    Eigen::VectorXd mean, sd;
    regression_.predict(points, mean, sd, include_noise_);
    const Eigen::VectorXd p_nan = classifier_.predict_probs(points);
    Eigen::VectorXd p(points.rows());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = hierarchical_failure_prob(mean(i), sd(i), p_nan(i));
    return p;
  }

  /// p(y undefined | x) from the classifier.
  [[nodiscard]] double nan_prob(const Eigen::Ref<const Eigen::VectorXd>& x) const { return classifier_.predict_prob(x); }

  [[nodiscard]] const RegressionPosterior& regression() const noexcept { return regression_; }
  [[nodiscard]] const EPPosterior& nan_classifier() const noexcept { return classifier_; }
  [[nodiscard]] std::size_t defined_count() const noexcept { return defined_count_; }
  [[nodiscard]] std::size_t undefined_count() const noexcept { return undefined_count_; }

 private:
  HierarchicalSurrogate(RegressionPosterior regression, EPPosterior classifier, std::size_t defined,
                        std::size_t undefined, bool include_noise)
      : regression_(std::move(regression)),
        classifier_(std::move(classifier)),
        defined_count_(defined),
        undefined_count_(undefined),
        include_noise_(include_noise) {}

  RegressionPosterior regression_;
  EPPosterior classifier_;
  std::size_t defined_count_;
  std::size_t undefined_count_;
  bool include_noise_;
};

}  // namespace hgp
