#pragma once

#include <stdexcept>
#include <string>

namespace dfm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the operation's declared domain (bad id, size
/// mismatch, non-positive step, ...).
class InputDomainError : public Error {
 public:
  using Error::Error;
};

/// A value that must be finite is not.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

/// ODE integration produced a non-finite state.
class TrajectoryDivergence : public NumericDomainError {
 public:
  TrajectoryDivergence(int step, const std::string& what)
      : NumericDomainError("trajectory diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// A score was requested that has no defined value (e.g. consistency with
/// no prior notes).
class UndefinedScoreError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unknown configuration content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A self-check failed (gradient check, replay check, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfm
