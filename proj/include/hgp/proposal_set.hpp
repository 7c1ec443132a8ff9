#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hgp/errors.hpp"
#include "hgp/performance.hpp"

namespace hgp {

/// Monte Carlo pool S drawn from p(x), plus the evaluated subset of it.
///
/// Points keep their index for life: enrichment appends, and an evaluated point
/// is never evaluated again.
class ProposalSet {
 public:
  explicit ProposalSet(Eigen::Index dimension) : points_(0, dimension) {}

  void append(const Eigen::Ref<const Eigen::MatrixXd>& points) {
    if (points.cols() != points_.cols()) throw InvalidArgument("proposal set: dimension mismatch");
    const Eigen::Index old = points_.rows();
    points_.conservativeResize(old + points.rows(), Eigen::NoChange);
    points_.bottomRows(points.rows()) = points;
    evaluated_.resize(static_cast<std::size_t>(points_.rows()), false);
  }

  void record(Eigen::Index index, PerformanceValue y) {
    if (index < 0 || index >= size()) throw InvalidArgument("proposal set: index out of range");
    if (evaluated_[static_cast<std::size_t>(index)]) throw InvalidArgument("proposal set: point already evaluated");
    evaluated_[static_cast<std::size_t>(index)] = true;
    samples_.push_back({points_.row(index).transpose(), y});
    sample_indices_.push_back(index);
  }

  [[nodiscard]] Eigen::Index size() const noexcept { return points_.rows(); }
  [[nodiscard]] Eigen::Index dimension() const noexcept { return points_.cols(); }
  [[nodiscard]] const Eigen::MatrixXd& points() const noexcept { return points_; }
  [[nodiscard]] bool is_evaluated(Eigen::Index i) const { return evaluated_.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] std::size_t evaluated_count() const noexcept { return samples_.size(); }
  [[nodiscard]] std::span<const LabeledSample> samples() const noexcept { return samples_; }
  [[nodiscard]] const std::vector<Eigen::Index>& sample_indices() const noexcept { return sample_indices_; }

 private:
  Eigen::MatrixXd points_;
  std::vector<bool> evaluated_;
  std::vector<LabeledSample> samples_;
  std::vector<Eigen::Index> sample_indices_;
};

}  // namespace hgp
