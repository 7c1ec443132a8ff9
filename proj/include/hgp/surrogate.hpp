#pragma once

#include <cmath>
#include <memory>
#include <span>

#include <Eigen/Dense>

#include "hgp/gp_classification.hpp"
#include "hgp/gp_regression.hpp"
#include "hgp/kernels.hpp"
#include "hgp/performance.hpp"

namespace hgp {

/// Settings shared by every surrogate family.
struct SurrogateConfig {
  RegressionBounds regression_bounds{};
  double noise_var = kDefaultNoiseVariance;
  FitOptions regression_fit{};
  bool predictive_includes_noise = false;  // true: score with the noisy-observation std instead of the latent one

  double nan_classifier_variance = 1e5;
  Bounds nan_classifier_lengthscale{1e-6, 0.2};

  double gpc_variance = 100.0;
  Bounds gpc_lengthscale{1e-6, 0.2};

  EpOptions ep{};
};

/// Phi(-mean / std); a zero std is a point mass, so the result is 1[mean < 0] (0.5 at 0).
inline double regression_failure_prob(double mean, double std_dev) noexcept {
  if (std_dev <= 0.0) return mean < 0.0 ? 1.0 : (mean == 0.0 ? 0.5 : 0.0);
  return std_normal_cdf(-mean / std_dev);
}

/// Probability of misclassifying the failure event when the decision is p > 0.5.
inline double misclassification_from_failure_prob(double p) noexcept { return p < 0.5 ? p : 1.0 - p; }

/// Anything that scores p(failure | x) over normalized inputs.
///
/// Implementations provide the batched form; the single-point helpers route
/// through it. Instances are immutable after construction.
class Surrogate {
 public:
  virtual ~Surrogate() = default;

  /// p(y < 0, y defined | x) for each row of `points`.
  [[nodiscard]] virtual Eigen::VectorXd failure_probs(const Eigen::Ref<const Eigen::MatrixXd>& points) const = 0;

  [[nodiscard]] double failure_prob(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return failure_probs(x.transpose())(0);
  }

  [[nodiscard]] double misclassification_prob(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return misclassification_from_failure_prob(failure_prob(x));
  }

  [[nodiscard]] Eigen::VectorXd misclassification_probs(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
    return failure_probs(points).unaryExpr([](double p) { return misclassification_from_failure_prob(p); });
  }

  /// Strict: a failure probability of exactly 0.5 is not a failure.
  [[nodiscard]] bool classify_failure(const Eigen::Ref<const Eigen::VectorXd>& x) const { return failure_prob(x) > 0.5; }
};

namespace detail {

inline Eigen::MatrixXd stack_inputs(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw InvalidArgument("no samples");
  const Eigen::Index k = samples.front().x.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), k);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].x.size() != k) throw InvalidArgument("samples have inconsistent dimensions");
    X.row(static_cast<Eigen::Index>(i)) = samples[i].x.transpose();
  }
  return X;
}

}  // namespace detail

}  // namespace hgp
