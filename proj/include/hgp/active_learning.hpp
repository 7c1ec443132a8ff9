#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hgp/errors.hpp"
#include "hgp/proposal_set.hpp"
#include "hgp/random.hpp"
#include "hgp/surrogate.hpp"

namespace hgp {

struct LoopConfig {
  double eta = 0.02;             // inner loop stops once max misclassification <= eta
  double cov_threshold = 0.1;    // outer loop stops once CoV <= threshold
  bool cov_exit = true;          // false: never stop on CoV (fixed-iteration studies)
  std::size_t n_mc = 5000;       // initial |S| and size of each enrichment
  std::size_t n_initial = 12;    // initial design of experiments
  std::size_t max_iterations = 150;
  std::size_t max_enrichments = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(eta >= 0.0 && eta < 0.5)) throw InvalidArgument("eta must lie in [0, 0.5)");
    if (!(cov_threshold > 0.0)) throw InvalidArgument("CoV threshold must be positive");
    if (n_initial < 2) throw InvalidArgument("initial design needs at least 2 points");
    if (n_mc < n_initial) throw InvalidArgument("n_mc must be at least the initial design size");
  }
};

enum class Termination { Converged, IterationCap };

/// Surrogate state after `iteration` acquisitions, assessed on the proposal set.
/// If an acquisition was made from this state, the chosen point is recorded too.
struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t evaluations = 0;
  std::size_t proposal_size = 0;
  double max_misclassification = 0.0;
  double pf = 0.0;
  std::optional<double> cov;
  std::optional<std::size_t> chosen_index;
  std::optional<PerformanceValue> observed;
  std::optional<double> f1;
  std::optional<double> average_precision;
};

struct RunRecord {
  std::vector<IterationRecord> iterations;
  std::size_t initial_evaluations = 0;
  std::size_t total_evaluations = 0;
  std::size_t acquisitions = 0;
  Termination termination = Termination::IterationCap;
  double pf = 0.0;
  std::optional<double> cov;
  double max_misclassification = 0.0;
  std::size_t proposal_size = 0;
};

struct RunResult {
  RunRecord record;
  std::unique_ptr<Surrogate> surrogate;
  ProposalSet proposals;
};

/// sqrt((1 - pf) / (pf n)); nullopt when pf == 0 (CoV undefined).
inline std::optional<double> coefficient_of_variation(double pf, std::size_t n) {
  if (!(pf >= 0.0 && pf <= 1.0)) throw InvalidArgument("CoV: pf must lie in [0, 1]");
  if (n < 1) throw InvalidArgument("CoV: n must be positive");
  if (pf == 0.0) return std::nullopt;
  return std::sqrt((1.0 - pf) / (pf * static_cast<double>(n)));
}

/// Fraction of the rows of `points` the surrogate classifies as failures.
inline double estimate_pf(const Surrogate& surrogate, const Eigen::Ref<const Eigen::MatrixXd>& points) {
  if (points.rows() == 0) throw InvalidArgument("estimate_pf: empty proposal set");
  const Eigen::VectorXd p = surrogate.failure_probs(points);
  return static_cast<double>((p.array() > 0.5).count()) / static_cast<double>(p.size());
}

inline double estimate_pf(const Surrogate& surrogate, const ProposalSet& proposals) {
  return estimate_pf(surrogate, proposals.points());
}

struct Assessment {
  double pf = 0.0;
  double max_misclassification = 0.0;
  std::optional<Eigen::Index> argmax;  // lowest index among the maximizers; unevaluated points only
};

/// One prediction pass over S: p_f over all of S, acquisition over unevaluated points.
inline Assessment assess(const Surrogate& surrogate, const ProposalSet& proposals) {
  if (proposals.size() == 0) throw InvalidArgument("assess: empty proposal set");
  const Eigen::VectorXd p = surrogate.failure_probs(proposals.points());
  Assessment a;
  Eigen::Index failures = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.5) ++failures;
    if (proposals.is_evaluated(i)) continue;
    const double m = misclassification_from_failure_prob(p(i));
    if (m > best) {
      best = m;
      a.argmax = i;
    }
  }
  a.pf = static_cast<double>(failures) / static_cast<double>(p.size());
  a.max_misclassification = a.argmax ? best : 0.0;
  return a;
}

/// Max predicted misclassification over the unevaluated points of S.
inline double max_misclassification(const Surrogate& surrogate, const ProposalSet& proposals) {
  return assess(surrogate, proposals).max_misclassification;
}

template <class F>
concept SurrogateFactory = requires(F f, std::span<const LabeledSample> s) {
  { f(s) } -> std::convertible_to<std::unique_ptr<Surrogate>>;
};

template <class F>
concept PerformanceFunction = requires(F f, const Eigen::VectorXd& x) {
  { f(x) } -> std::convertible_to<PerformanceValue>;
};

template <class F>
concept InputSampler = requires(F f, Rng& rng) {
  { f(rng) } -> std::convertible_to<Eigen::VectorXd>;
};

using IterationObserver = std::function<void(const Surrogate&, IterationRecord&)>;

namespace detail {

template <InputSampler Sampler>
Eigen::MatrixXd draw_points(Sampler& sampler, Rng& rng, std::size_t n) {
  if (n == 0) throw InvalidArgument("draw_points: need at least one draw");
  Eigen::VectorXd first = sampler(rng);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), first.size());
  pts.row(0) = first.transpose();
  for (std::size_t i = 1; i < n; ++i) pts.row(static_cast<Eigen::Index>(i)) = sampler(rng).transpose();
  return pts;
}

}  // namespace detail

/// AK-MCS active learning with an arbitrary surrogate family.
///
/// Inner loop: rebuild the surrogate on the evaluated set, evaluate the system at
/// the unevaluated proposal point with the highest misclassification probability,
/// repeat until that maximum is <= eta. Outer loop: estimate p_f on S; stop if
/// CoV <= threshold, otherwise enrich S with n_mc fresh draws. Enrichment adds
/// unevaluated points only. Acquisitions are capped at max_iterations (and
/// enrichments at max_enrichments); hitting either cap ends the run as IterationCap.
///
/// If the factory throws UnbuildableSurrogate, the initial design is extended with
/// further uniform draws from S until it succeeds.
template <SurrogateFactory Factory, PerformanceFunction System, InputSampler Sampler>
RunResult run(Factory&& make_surrogate, System&& system, Sampler&& sampler, const LoopConfig& config,
              const IterationObserver& observer = {}) {
  config.validate();
  Rng rng(config.seed);
  const Eigen::MatrixXd initial_pool = detail::draw_points(sampler, rng, config.n_mc);
  ProposalSet proposals(initial_pool.cols());
  proposals.append(initial_pool);

  for (std::size_t idx : sample_without_replacement(rng, static_cast<std::size_t>(proposals.size()), config.n_initial)) {
    const auto i = static_cast<Eigen::Index>(idx);
    proposals.record(i, system(Eigen::VectorXd(proposals.points().row(i).transpose())));
  }

  auto build = [&]() -> std::unique_ptr<Surrogate> { return make_surrogate(proposals.samples()); };
  std::unique_ptr<Surrogate> surrogate;
  while (!surrogate) {
    try {
      surrogate = build();
    } catch (const UnbuildableSurrogate&) {
      if (proposals.evaluated_count() == static_cast<std::size_t>(proposals.size())) throw;
      Eigen::Index pick = 0;
      do {
        pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(proposals.size())));
      } while (proposals.is_evaluated(pick));
      proposals.record(pick, system(Eigen::VectorXd(proposals.points().row(pick).transpose())));
    }
  }

  RunRecord record;
  record.initial_evaluations = proposals.evaluated_count();
  std::size_t enrichments = 0;

  for (;;) {
    const Assessment a = assess(*surrogate, proposals);
    IterationRecord it;
    it.iteration = record.acquisitions;
    it.evaluations = proposals.evaluated_count();
    it.proposal_size = static_cast<std::size_t>(proposals.size());
    it.max_misclassification = a.max_misclassification;
    it.pf = a.pf;
    it.cov = coefficient_of_variation(a.pf, it.proposal_size);
    if (observer) observer(*surrogate, it);

    record.pf = it.pf;
    record.cov = it.cov;
    record.max_misclassification = it.max_misclassification;
    record.proposal_size = it.proposal_size;

    if (a.max_misclassification > config.eta && a.argmax) {
      if (record.acquisitions >= config.max_iterations) {
        record.iterations.push_back(std::move(it));
        record.termination = Termination::IterationCap;
        break;
      }
      const Eigen::Index chosen = *a.argmax;
      const PerformanceValue y = system(Eigen::VectorXd(proposals.points().row(chosen).transpose()));
      proposals.record(chosen, y);
      it.chosen_index = static_cast<std::size_t>(chosen);
      it.observed = y;
      record.iterations.push_back(std::move(it));
      ++record.acquisitions;
      surrogate = build();
      continue;
    }

    record.iterations.push_back(std::move(it));
    const double cov = record.cov.value_or(std::numeric_limits<double>::infinity());
    if (config.cov_exit && cov <= config.cov_threshold) {
      record.termination = Termination::Converged;
      break;
    }
    if (enrichments >= config.max_enrichments) {
      record.termination = Termination::IterationCap;
      break;
    }
    proposals.append(detail::draw_points(sampler, rng, config.n_mc));
    ++enrichments;
  }

  record.total_evaluations = proposals.evaluated_count();
  return {std::move(record), std::move(surrogate), std::move(proposals)};
}

}  // namespace hgp
