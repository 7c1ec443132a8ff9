#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace hgp {

/// Precondition or argument violation (bad dimension, non-finite input, empty data).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Gram matrix could not be factorized, even after jitter escalation.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::size_t dataset_size)
      : std::runtime_error(what + " (dataset size " + std::to_string(dataset_size) + ")"),
        dataset_size_(dataset_size) {}

  [[nodiscard]] std::size_t dataset_size() const noexcept { return dataset_size_; }

 private:
  std::size_t dataset_size_;
};

/// Expectation propagation did not reach its tolerance within the sweep cap.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  [[nodiscard]] double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// The training samples cannot support the requested surrogate (e.g. no defined values).
class UnbuildableSurrogate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric has no meaningful value on the given data (e.g. AP without positives).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Reading or writing an experiment artifact failed.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : std::runtime_error(what + ": " + path.string()), path_(std::move(path)) {}

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace hgp
