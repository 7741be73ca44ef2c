#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace clc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A Riccati or proxy-cost stage denominator vanished or became negative.
class DegenerateCost : public Error {
 public:
  DegenerateCost(const std::string& what, int stage)
      : Error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// The candidate-trajectory space exceeds the configured budget.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, double size)
      : Error(what), size_(size) {}
  /// Requested number of candidates (double so it cannot overflow).
  double size() const { return size_; }

 private:
  double size_;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

/// The coupled equations have no candidate within the acceptance threshold.
class NoFixedPoint : public Error {
 public:
  NoFixedPoint(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

/// An iterative learner produced a non-finite or runaway iterate.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, double last_finite)
      : Error(what), last_finite_(last_finite) {}
  double last_finite() const { return last_finite_; }

 private:
  double last_finite_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace clc
