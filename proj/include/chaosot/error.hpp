#pragma once

#include <stdexcept>
#include <string>

namespace chaosot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or sizes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, divergence, or an iteration that failed numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A simulation or rollout left the admissible region.
class BlowUpError : public NumericalError {
 public:
  BlowUpError(const std::string& what, long step) : NumericalError(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Malformed files, configs, or unsupported inputs.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values or unsupported problem sizes.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace chaosot
