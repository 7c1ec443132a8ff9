#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "hgp/benchmarks.hpp"
#include "hgp/errors.hpp"
#include "hgp/surrogate.hpp"

namespace hgp {

/// Ground-truth points drawn from p(x) (normalized) with their true failure labels.
struct TestSet {
  Eigen::MatrixXd points;
  std::vector<bool> labels;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

inline TestSet make_test_set(const Benchmark& bench, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  TestSet t;
  t.points.resize(static_cast<Eigen::Index>(n), bench.dimension());
  t.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd u = bench.sample(rng);
    t.points.row(static_cast<Eigen::Index>(i)) = u.transpose();
    t.labels[i] = bench.evaluate(u).is_failure();
  }
  return t;
}

/// F1 with failure as the positive class. Defined as 0 when there are no
/// predicted and no actual positives.
inline double f1_from_predictions(const std::vector<bool>& truth, const std::vector<bool>& predicted) {
  if (truth.size() != predicted.size()) throw InvalidArgument("f1: size mismatch");
  if (truth.empty()) throw InvalidArgument("f1: empty test set");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] && truth[i]) ++tp;
    else if (predicted[i]) ++fp;
    else if (truth[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

/// Step-interpolated area under the precision-recall curve: sum over ranks of
/// (recall_k - recall_{k-1}) * precision_k, ranking by descending score with
/// ties broken by lower index.
inline double average_precision_from_scores(const std::vector<bool>& truth, const Eigen::Ref<const Eigen::VectorXd>& scores) {
  if (truth.size() != static_cast<std::size_t>(scores.size())) throw InvalidArgument("average_precision: size mismatch");
  const auto positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  if (positives == 0) throw UndefinedMetric("average precision is undefined without positive examples");
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!truth[order[rank]]) continue;
    ++tp;
    ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
  }
  return ap / static_cast<double>(positives);
}

inline double f1_score(const Surrogate& surrogate, const TestSet& test) {
  const Eigen::VectorXd p = surrogate.failure_probs(test.points);
  std::vector<bool> predicted(test.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = p(static_cast<Eigen::Index>(i)) > 0.5;
  return f1_from_predictions(test.labels, predicted);
}

inline double average_precision(const Surrogate& surrogate, const TestSet& test) {
  return average_precision_from_scores(test.labels, surrogate.failure_probs(test.points));
}

struct ClassificationMetrics {
  double f1;
  double average_precision;
};

/// F1 and AP from a single pass of predictions over the test set.
inline ClassificationMetrics classification_metrics(const Surrogate& surrogate, const TestSet& test) {
  const Eigen::VectorXd p = surrogate.failure_probs(test.points);
  std::vector<bool> predicted(test.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = p(static_cast<Eigen::Index>(i)) > 0.5;
  return {f1_from_predictions(test.labels, predicted), average_precision_from_scores(test.labels, p)};
}

}  // namespace hgp
