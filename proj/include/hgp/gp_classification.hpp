#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "hgp/errors.hpp"
#include "hgp/kernels.hpp"

namespace hgp {

/// Binary classification data; labels are +1 (positive event) or -1.
struct ClassificationDataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd labels;

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw InvalidArgument("classification dataset is empty");
    if (labels.size() != X.rows()) throw InvalidArgument("classification dataset: X and labels sizes differ");
    if (!X.allFinite()) throw InvalidArgument("classification dataset contains non-finite inputs");
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      if (labels(i) != 1.0 && labels(i) != -1.0) throw InvalidArgument("classification labels must be +1 or -1");
  }
};

struct EpOptions {
  double tolerance = 1e-6;  // max absolute site-parameter change per sweep
  int max_sweeps = 100;
};

/// Natural parameters of the Gaussian site approximations.
struct EpSites {
  Eigen::VectorXd precision;  // tau-tilde, >= 0
  Eigen::VectorXd shift;      // nu-tilde (precision-scaled mean)
};

struct LatentPrediction {
  double mean;
  double variance;
};

/// Probit-likelihood GP classifier fitted by expectation propagation.
///
/// Stores the converged sites plus the Cholesky factor of B = I + S^1/2 K S^1/2,
/// which is all prediction needs. Immutable after construction.
class EPPosterior {
 public:
  EPPosterior(Eigen::MatrixXd X, const KernelParams& params, EpSites sites, Eigen::MatrixXd b_lower,
              Eigen::VectorXd weights, double log_evidence, int sweeps)
      : X_(std::move(X)),
        params_(params),
        sites_(std::move(sites)),
        sqrt_precision_(sites_.precision.array().sqrt()),
        b_lower_(std::move(b_lower)),
        weights_(std::move(weights)),
        log_evidence_(log_evidence),
        sweeps_(sweeps) {}

  [[nodiscard]] LatentPrediction predict_latent(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != X_.cols()) throw InvalidArgument("predict_latent: query dimension does not match training data");
    Eigen::VectorXd mean(1), var(1);
    predict_latent(x.transpose(), mean, var);
    return {mean(0), var(0)};
  }

  void predict_latent(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::VectorXd& mean,
                      Eigen::VectorXd& variance) const {
    if (queries.cols() != X_.cols()) throw InvalidArgument("predict_latent: query dimension does not match training data");
    constexpr Eigen::Index kBlock = 2048;
    const Eigen::Index m = queries.rows();
    mean.resize(m);
    variance.resize(m);
    for (Eigen::Index start = 0; start < m; start += kBlock) {
      const Eigen::Index len = std::min(kBlock, m - start);
      Eigen::MatrixXd kq = cross_covariance(X_, queries.middleRows(start, len), params_);
      mean.segment(start, len).noalias() = kq.transpose() * weights_;
      kq = sqrt_precision_.asDiagonal() * kq;
      b_lower_.triangularView<Eigen::Lower>().solveInPlace(kq);
      variance.segment(start, len) =
          (params_.variance - kq.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
    }
  }

  /// p(y = +1 | x) = Phi(mean / sqrt(1 + var)).
  [[nodiscard]] double predict_prob(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const auto lp = predict_latent(x);
    return std_normal_cdf(lp.mean / std::sqrt(1.0 + lp.variance));
  }

  [[nodiscard]] Eigen::VectorXd predict_probs(const Eigen::Ref<const Eigen::MatrixXd>& queries) const {
    Eigen::VectorXd mean, var;
    predict_latent(queries, mean, var);
    Eigen::VectorXd p(mean.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std_normal_cdf(mean(i) / std::sqrt(1.0 + var(i)));
    return p;
  }

  [[nodiscard]] const KernelParams& params() const noexcept { return params_; }
  [[nodiscard]] const EpSites& sites() const noexcept { return sites_; }
  [[nodiscard]] double log_evidence() const noexcept { return log_evidence_; }
  [[nodiscard]] int sweeps() const noexcept { return sweeps_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return X_.rows(); }

 private:
  Eigen::MatrixXd X_;
  KernelParams params_;
  EpSites sites_;
  Eigen::VectorXd sqrt_precision_;
  Eigen::MatrixXd b_lower_;
  Eigen::VectorXd weights_;
  double log_evidence_;
  int sweeps_;
};

namespace detail {

struct EpState {
  Eigen::MatrixXd sigma;  // approximate posterior covariance
  Eigen::VectorXd mu;     // approximate posterior mean
  Eigen::MatrixXd b_lower;
};

// Posterior from the sites by the numerically stable route through B.
inline EpState ep_recompute(const Eigen::MatrixXd& k, const EpSites& sites) {
  const Eigen::Index n = k.rows();
  const Eigen::VectorXd sw = sites.precision.array().sqrt();
  Eigen::MatrixXd b = sw.asDiagonal() * k * sw.asDiagonal();
  b.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(b);
  if (llt.info() != Eigen::Success) throw NumericalFailure("EP: B matrix is not positive definite", static_cast<std::size_t>(n));
  EpState st;
  st.b_lower = llt.matrixL();
  Eigen::MatrixXd v = sw.asDiagonal() * k;
  st.b_lower.triangularView<Eigen::Lower>().solveInPlace(v);
  st.sigma = k - v.transpose() * v;
  st.mu = st.sigma * sites.shift;
  return st;
}

// Approximate log marginal likelihood (EP evidence) at the current sites.
inline double ep_log_evidence(const Eigen::VectorXd& labels, const EpSites& sites, const EpState& st) {
  const Eigen::Index n = labels.size();
  const Eigen::VectorXd& tt = sites.precision;
  const Eigen::VectorXd& tn = sites.shift;
  double value = -st.b_lower.diagonal().array().log().sum() + 0.5 * tn.dot(st.sigma * tn);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s_ii = st.sigma(i, i);
    const double tau_c = 1.0 / s_ii - tt(i);
    const double nu_c = st.mu(i) / s_ii - tn(i);
    const double z = labels(i) * (nu_c / tau_c) / std::sqrt(1.0 + 1.0 / tau_c);
    value += log_std_normal_cdf(z);
    value += 0.5 * nu_c * (tt(i) / tau_c * nu_c - 2.0 * tn(i)) / (tt(i) + tau_c);
    value -= 0.5 * tn(i) * tn(i) / (tau_c + tt(i));
    value += 0.5 * std::log1p(tt(i) / tau_c);
  }
  return value;
}

}  // namespace detail

/// Sequential EP (index order) for probit GP classification with fixed kernel
/// hyperparameters. `warm_start`, when sized to the data, seeds the sites.
inline EPPosterior fit_ep(const ClassificationDataset& data, const KernelParams& params, const EpOptions& options = {},
                          const EpSites* warm_start = nullptr) {
  data.validate();
  params.validate();
  const Eigen::Index n = data.X.rows();
  const Eigen::MatrixXd k = gram_matrix(data.X, params, 0.0);
  const Eigen::VectorXd& y = data.labels;

  EpSites sites{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  if (warm_start != nullptr && warm_start->precision.size() == n && warm_start->shift.size() == n) sites = *warm_start;
  detail::EpState st = detail::ep_recompute(k, sites);

  double residual = std::numeric_limits<double>::infinity();
  int sweep = 0;
  while (sweep < options.max_sweeps) {
    ++sweep;
    residual = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s_ii = st.sigma(i, i);
      const double tau_c = 1.0 / s_ii - sites.precision(i);
      if (!(tau_c > 0.0) || !std::isfinite(tau_c))
        throw NumericalFailure("EP: non-positive cavity precision", static_cast<std::size_t>(n));
      const double nu_c = st.mu(i) / s_ii - sites.shift(i);
      const double var_c = 1.0 / tau_c;
      const double mean_c = nu_c * var_c;

      // Moments of the tilted distribution Phi(y f) N(f | mean_c, var_c).
      const double denom = std::sqrt(1.0 + var_c);
      const double z = y(i) * mean_c / denom;
      const double ratio = normal_pdf_cdf_ratio(z);
      const double mean_hat = mean_c + y(i) * var_c * ratio / denom;
      const double var_hat = var_c - var_c * var_c * ratio / (1.0 + var_c) * (z + ratio);

      const double old_tau = sites.precision(i);
      const double old_nu = sites.shift(i);
      const double new_tau = std::max(0.0, 1.0 / var_hat - tau_c);
      const double new_nu = mean_hat / var_hat - nu_c;
      const double delta_tau = new_tau - old_tau;
      sites.precision(i) = new_tau;
      sites.shift(i) = new_nu;
      residual = std::max({residual, std::abs(delta_tau), std::abs(new_nu - old_nu)});

      if (delta_tau != 0.0) {
        const Eigen::VectorXd s_i = st.sigma.col(i);
        const double scale = delta_tau / (1.0 + delta_tau * s_ii);
        st.sigma.noalias() -= scale * s_i * s_i.transpose();
      }
      st.mu.noalias() = st.sigma * sites.shift;
    }
    st = detail::ep_recompute(k, sites);
    if (residual < options.tolerance) break;
  }
  if (!(residual < options.tolerance)) throw ConvergenceError("EP did not converge", residual);

  // Predictive weights: mean(x*) = k(x*, X)^T (nu - S^1/2 B^-1 S^1/2 K nu).
  const Eigen::VectorXd sw = sites.precision.array().sqrt();
  Eigen::VectorXd t = sw.asDiagonal() * (k * sites.shift);
  st.b_lower.triangularView<Eigen::Lower>().solveInPlace(t);
  st.b_lower.triangularView<Eigen::Lower>().transpose().solveInPlace(t);
  Eigen::VectorXd weights = sites.shift - sw.asDiagonal() * t;

  const double log_z = detail::ep_log_evidence(y, sites, st);
  return EPPosterior(data.X, params, std::move(sites), std::move(st.b_lower), std::move(weights), log_z, sweep);
}

/// EP fit with the kernel variance fixed and the lengthscale chosen to maximize
/// the EP evidence inside `lengthscale_bounds` (log-spaced grid, then Brent).
inline EPPosterior fit_ep_lengthscale(const ClassificationDataset& data, double variance, const Bounds& lengthscale_bounds,
                                      const EpOptions& options = {}) {
  data.validate();
  lengthscale_bounds.validate();
  if (lengthscale_bounds.lower <= 0.0) throw InvalidArgument("fit_ep_lengthscale: lengthscale bounds must be positive");

  std::optional<EPPosterior> best;
  std::optional<EpSites> last_sites;
  auto evaluate = [&](double log_l) -> double {
    const KernelParams p{std::exp(log_l), variance};
    try {
      EPPosterior post = fit_ep(data, p, options, last_sites ? &*last_sites : nullptr);
      last_sites = post.sites();
      const double v = post.log_evidence();
      if (!best || v > best->log_evidence()) best.emplace(std::move(post));
      return v;
    } catch (const ConvergenceError&) {
      last_sites.reset();
      return -std::numeric_limits<double>::infinity();
    } catch (const NumericalFailure&) {
      last_sites.reset();
      return -std::numeric_limits<double>::infinity();
    }
  };

  constexpr int kGrid = 7;
  const double lo = std::log(lengthscale_bounds.lower);
  const double hi = std::log(lengthscale_bounds.upper);
  std::vector<double> grid(kGrid), values(kGrid);
  // Descending from the upper bound: long lengthscales are the usual optimum and
  // make a good warm start for shorter ones.
  for (int g = 0; g < kGrid; ++g) {
    grid[g] = hi - (hi - lo) * g / (kGrid - 1);
    values[g] = evaluate(grid[g]);
  }
  const auto arg = static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
  if (!std::isfinite(values[arg])) {
    // Every grid point failed; surface the error from the upper bound.
    return fit_ep(data, {lengthscale_bounds.upper, variance}, options);
  }
  const double a = grid[std::min(arg + 1, kGrid - 1)];
  const double b = grid[std::max(arg - 1, 0)];
  boost::uintmax_t max_iter = 40;
  boost::math::tools::brent_find_minima([&](double log_l) { return -evaluate(log_l); }, a, b, 20, max_iter);
  return std::move(*best);
}

}  // namespace hgp
