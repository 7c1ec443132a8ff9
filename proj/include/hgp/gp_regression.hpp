#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "hgp/errors.hpp"
#include "hgp/kernels.hpp"
#include "hgp/random.hpp"

namespace hgp {

inline constexpr double kDefaultNoiseVariance = 0.005 * 0.005;

/// Box constraints for regression hyperparameters. The lengthscale floor is
/// strictly positive; a zero lengthscale is a degenerate kernel.
struct RegressionBounds {
  Bounds lengthscale{1e-6, 0.2};
  Bounds variance{0.5, 1.0};
};

/// Defined-only training data: X is n x k (one point per row), y has length n.
struct RegressionDataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw InvalidArgument("regression dataset is empty");
    if (y.size() != X.rows()) throw InvalidArgument("regression dataset: X and y sizes differ");
    if (!X.allFinite() || !y.allFinite()) throw InvalidArgument("regression dataset contains non-finite values");
  }
};

struct Prediction {
  double mean;
  double std_dev;
};

struct FitOptions {
  int restarts = 5;
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;
  std::uint64_t seed = 0x6a09e667f3bcc908ULL;
};

namespace detail {

inline constexpr std::array<double, 5> kJitterLadder{1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

struct Factorization {
  Eigen::MatrixXd lower;  // L with K + jitter I = L L^T
  double jitter = 0.0;
};

/// Cholesky of k, escalating diagonal jitter on failure when allowed.
inline Factorization factorize(const Eigen::MatrixXd& k, bool allow_jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
  if (allow_jitter) {
    for (double jitter : kJitterLadder) {
      Eigen::MatrixXd shifted = k;
      shifted.diagonal().array() += jitter;
      llt.compute(shifted);
      if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    }
  }
  throw NumericalFailure("Gram matrix is not positive definite", static_cast<std::size_t>(k.rows()));
}

inline double lml_from_factor(const Factorization& f, const Eigen::VectorXd& y, Eigen::VectorXd* alpha_out) {
  const auto L = f.lower.triangularView<Eigen::Lower>();
  Eigen::VectorXd alpha = L.solve(y);
  const double quad = alpha.squaredNorm();
  L.transpose().solveInPlace(alpha);
  const double log_det_half = f.lower.diagonal().array().log().sum();
  if (alpha_out != nullptr) *alpha_out = std::move(alpha);
  return -0.5 * quad - log_det_half - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace detail

/// Zero-mean GP log evidence log N(y | 0, K + noise_var I). Throws
/// NumericalFailure when the Gram matrix is not positive definite; no jitter is added.
inline double log_marginal_likelihood(const RegressionDataset& data, const KernelParams& params, double noise_var) {
  data.validate();
  const auto f = detail::factorize(gram_matrix(data.X, params, noise_var), false);
  return detail::lml_from_factor(f, data.y, nullptr);
}

struct LmlWithGradient {
  double value;
  double d_log_lengthscale;
  double d_log_variance;
};

/// Log evidence and its gradient with respect to (log lengthscale, log variance).
inline LmlWithGradient log_marginal_likelihood_with_gradient(const RegressionDataset& data, const KernelParams& params,
                                                             double noise_var, bool allow_jitter = false) {
  data.validate();
  const Eigen::MatrixXd dist = pairwise_distances(data.X, data.X);
  Eigen::MatrixXd k = dist.unaryExpr([&params](double r) { return matern52_radial(r, params); });
  const Eigen::MatrixXd k_signal = k;
  k.diagonal().array() += noise_var;
  const auto f = detail::factorize(k, allow_jitter);
  Eigen::VectorXd alpha;
  const double value = detail::lml_from_factor(f, data.y, &alpha);

  const auto n = data.X.rows();
  Eigen::MatrixXd k_inv = Eigen::MatrixXd::Identity(n, n);
  f.lower.triangularView<Eigen::Lower>().solveInPlace(k_inv);
  f.lower.triangularView<Eigen::Lower>().transpose().solveInPlace(k_inv);
  const Eigen::MatrixXd w = alpha * alpha.transpose() - k_inv;
  const Eigen::MatrixXd dk_dl = dist.unaryExpr([&params](double r) { return matern52_radial_dlog_lengthscale(r, params); });
  return {value, 0.5 * w.cwiseProduct(dk_dl).sum(), 0.5 * w.cwiseProduct(k_signal).sum()};
}

/// Exact GP regression posterior with fixed hyperparameters.
///
/// Immutable once constructed; all queries are const and thread-safe.
class RegressionPosterior {
 public:
  RegressionPosterior(RegressionDataset data, const KernelParams& params, double noise_var)
      : X_(std::move(data.X)), params_(params), noise_var_(noise_var) {
    if (!(noise_var >= 0.0)) throw InvalidArgument("noise variance must be nonnegative");
    RegressionDataset view{X_, data.y};
    view.validate();
    params_.validate();
    factor_ = detail::factorize(gram_matrix(X_, params_, noise_var_), true);
    lml_ = detail::lml_from_factor(factor_, data.y, &alpha_);
  }

  /// Latent f posterior; with `include_noise` the std covers a noisy observation.
  [[nodiscard]] Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& x, bool include_noise = false) const {
    if (x.size() != X_.cols()) throw InvalidArgument("predict: query dimension does not match training data");
    Eigen::VectorXd mean(1), sd(1);
    predict(x.transpose(), mean, sd, include_noise);
    return {mean(0), sd(0)};
  }

  /// Batched prediction over the rows of `queries`.
  void predict(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::VectorXd& mean, Eigen::VectorXd& std_dev,
               bool include_noise = false) const {
    if (queries.cols() != X_.cols()) throw InvalidArgument("predict: query dimension does not match training data");
    constexpr Eigen::Index kBlock = 2048;
    const Eigen::Index m = queries.rows();
    mean.resize(m);
    std_dev.resize(m);
    const double var_cap = params_.variance + noise_var_;
    const double extra = include_noise ? noise_var_ : 0.0;
    for (Eigen::Index start = 0; start < m; start += kBlock) {
      const Eigen::Index len = std::min(kBlock, m - start);
      Eigen::MatrixXd kq = cross_covariance(X_, queries.middleRows(start, len), params_);
      mean.segment(start, len).noalias() = kq.transpose() * alpha_;
      factor_.lower.triangularView<Eigen::Lower>().solveInPlace(kq);
      const Eigen::VectorXd reduction = kq.colwise().squaredNorm().transpose();
      for (Eigen::Index i = 0; i < len; ++i) {
        const double var = std::clamp(params_.variance - reduction(i) + extra, 0.0, var_cap);
        std_dev(start + i) = std::sqrt(var);
      }
    }
  }

  [[nodiscard]] const KernelParams& params() const noexcept { return params_; }
  [[nodiscard]] double noise_var() const noexcept { return noise_var_; }
  [[nodiscard]] double jitter() const noexcept { return factor_.jitter; }
  [[nodiscard]] Eigen::Index size() const noexcept { return X_.rows(); }
  [[nodiscard]] Eigen::Index dimension() const noexcept { return X_.cols(); }
  [[nodiscard]] const Eigen::MatrixXd& inputs() const noexcept { return X_; }
  [[nodiscard]] double log_marginal_likelihood() const noexcept { return lml_; }

 private:
  Eigen::MatrixXd X_;
  KernelParams params_;
  double noise_var_;
  detail::Factorization factor_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

namespace detail {

// Hyperparameters are searched in an unconstrained space u in R^2, mapped onto the
// box through a logistic squash of the log-parameters.
struct BoxTransform {
  RegressionBounds box;
  double log_l_lo, log_l_hi, log_v_lo, log_v_hi;

  explicit BoxTransform(const RegressionBounds& b)
      : box(b),
        log_l_lo(std::log(b.lengthscale.lower)),
        log_l_hi(std::log(b.lengthscale.upper)),
        log_v_lo(std::log(b.variance.lower)),
        log_v_hi(std::log(b.variance.upper)) {}

  static double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

  // exp(log(bound)) can round one ulp outside the box; clamp back in.
  [[nodiscard]] KernelParams params(double u0, double u1) const {
    return {std::clamp(std::exp(log_l_lo + (log_l_hi - log_l_lo) * sigmoid(u0)), box.lengthscale.lower, box.lengthscale.upper),
            std::clamp(std::exp(log_v_lo + (log_v_hi - log_v_lo) * sigmoid(u1)), box.variance.lower, box.variance.upper)};
  }
  [[nodiscard]] double dlogl_du(double u0) const {
    const double s = sigmoid(u0);
    return (log_l_hi - log_l_lo) * s * (1.0 - s);
  }
  [[nodiscard]] double dlogv_du(double u1) const {
    const double s = sigmoid(u1);
    return (log_v_hi - log_v_lo) * s * (1.0 - s);
  }
};

struct LmlObjective {
  const RegressionDataset* data;
  double noise_var;
  BoxTransform box;
  double best_value = -std::numeric_limits<double>::infinity();
  KernelParams best_params{};

  void consider(double value, const KernelParams& p) {
    if (value > best_value) {
      best_value = value;
      best_params = p;
    }
  }

  static double f(const gsl_vector* u, void* self_ptr) {
    auto* self = static_cast<LmlObjective*>(self_ptr);
    const KernelParams p = self->box.params(gsl_vector_get(u, 0), gsl_vector_get(u, 1));
    try {
      const auto fac = factorize(gram_matrix(self->data->X, p, self->noise_var), true);
      const double v = lml_from_factor(fac, self->data->y, nullptr);
      self->consider(v, p);
      return -v;
    } catch (const NumericalFailure&) {
      return std::numeric_limits<double>::max();
    }
  }

  static void fdf(const gsl_vector* u, void* self_ptr, double* value, gsl_vector* grad) {
    auto* self = static_cast<LmlObjective*>(self_ptr);
    const double u0 = gsl_vector_get(u, 0);
    const double u1 = gsl_vector_get(u, 1);
    const KernelParams p = self->box.params(u0, u1);
    try {
      const auto g = log_marginal_likelihood_with_gradient(*self->data, p, self->noise_var, true);
      self->consider(g.value, p);
      *value = -g.value;
      gsl_vector_set(grad, 0, -g.d_log_lengthscale * self->box.dlogl_du(u0));
      gsl_vector_set(grad, 1, -g.d_log_variance * self->box.dlogv_du(u1));
    } catch (const NumericalFailure&) {
      *value = std::numeric_limits<double>::max();
      gsl_vector_set_zero(grad);
    }
  }

  static void df(const gsl_vector* u, void* self_ptr, gsl_vector* grad) {
    double ignored = 0.0;
    fdf(u, self_ptr, &ignored, grad);
  }
};

inline void silence_gsl() {
  static const bool done = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)done;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace detail

/// Fits kernel hyperparameters by maximizing the log marginal likelihood inside
/// `bounds`, using BFGS from Latin-hypercube starts, then conditions on the data.
inline RegressionPosterior fit(const RegressionDataset& data, const RegressionBounds& bounds, double noise_var,
                               const FitOptions& options = {}) {
  data.validate();
  bounds.lengthscale.validate();
  bounds.variance.validate();
  if (bounds.lengthscale.lower <= 0.0 || bounds.variance.lower <= 0.0)
    throw InvalidArgument("fit: hyperparameter bounds must be strictly positive");
  if (!(noise_var >= 0.0)) throw InvalidArgument("fit: noise variance must be nonnegative");
  detail::silence_gsl();

  detail::LmlObjective objective{&data, noise_var, detail::BoxTransform(bounds)};
  gsl_multimin_function_fdf fn{&detail::LmlObjective::f, &detail::LmlObjective::df, &detail::LmlObjective::fdf, 2,
                               &objective};

  const int starts = std::max(1, options.restarts);
  Rng rng(options.seed);
  std::array<std::vector<std::size_t>, 2> strata;
  for (auto& s : strata) s = sample_without_replacement(rng, static_cast<std::size_t>(starts), static_cast<std::size_t>(starts));

  gsl_vector* u = gsl_vector_alloc(2);
  gsl_multimin_fdfminimizer* minimizer = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, 2);
  for (int s = 0; s < starts; ++s) {
    for (std::size_t d = 0; d < 2; ++d) {
      const double pos = (static_cast<double>(strata[d][static_cast<std::size_t>(s)]) + uniform01(rng)) / starts;
      gsl_vector_set(u, d, detail::logit(std::clamp(pos, 1e-3, 1.0 - 1e-3)));
    }
    if (gsl_multimin_fdfminimizer_set(minimizer, &fn, u, 0.5, 0.1) != GSL_SUCCESS) continue;
    for (int it = 0; it < options.max_iterations; ++it) {
      if (gsl_multimin_fdfminimizer_iterate(minimizer) != GSL_SUCCESS) break;
      if (gsl_multimin_test_gradient(minimizer->gradient, options.gradient_tolerance) == GSL_SUCCESS) break;
    }
  }
  gsl_multimin_fdfminimizer_free(minimizer);
  gsl_vector_free(u);

  if (!std::isfinite(objective.best_value))
    throw NumericalFailure("no hyperparameter setting gave a factorizable Gram matrix", static_cast<std::size_t>(data.X.rows()));
  return RegressionPosterior(data, objective.best_params, noise_var);
}

}  // namespace hgp
