#pragma once

#include <stdexcept>
#include <string>

namespace pgp {

/// Bad arguments: dimension mismatches, out-of-range parameters, malformed
/// configuration values.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear-algebra or iterative routine could not produce a usable result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky failed even at the top of the jitter ladder.
class FactorizationFailure : public NumericalFailure {
 public:
  FactorizationFailure(const std::string& what, double last_jitter)
      : NumericalFailure(what), last_jitter_(last_jitter) {}
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

/// The HMC chain stopped producing finite trajectories.
class SamplerFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// A scalar Newton solve ran out of iterations.
class NonConvergence : public NumericalFailure {
 public:
  NonConvergence(const std::string& what, double final_gradient)
      : NumericalFailure(what), final_gradient_(final_gradient) {}
  double final_gradient() const noexcept { return final_gradient_; }

 private:
  double final_gradient_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pgp
