#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace jini {

/// Bad input to a public operation (dimension mismatch, out-of-range parameter, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value or could not make progress.
/// Carries the offending observation / sample index when one is known.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what,
                          std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(what), index_(index) {}

  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  std::optional<std::size_t> index_;
};

/// Count simulation would exceed the supported support cap.
class SimulationOverflow : public NumericFailure {
 public:
  SimulationOverflow(const std::string& what, std::size_t index)
      : NumericFailure(what, index) {}
};

/// The initial estimator could not be computed on the observed sample.
class InitialEstimatorFailure : public NumericFailure {
 public:
  explicit InitialEstimatorFailure(const std::string& what)
      : NumericFailure("initial-estimator-failure: " + what) {}
};

/// An inner fit on simulated sample h failed under the abort policy.
class InnerFitFailure : public std::runtime_error {
 public:
  InnerFitFailure(std::size_t h, const std::string& cause)
      : std::runtime_error("inner fit failed on simulated sample " +
                           std::to_string(h) + ": " + cause),
        h_(h) {}

  std::size_t sample() const noexcept { return h_; }

 private:
  std::size_t h_;
};

}  // namespace jini
