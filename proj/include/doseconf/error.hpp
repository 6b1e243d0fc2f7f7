#pragma once

#include <stdexcept>
#include <string>

namespace doseconf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A learner could not be fit to the supplied data.
class FitError : public Error {
 public:
  using Error::Error;
};

/// A locally calibrated distribution was requested for a treatment value that
/// was not part of the precalibrated grid.
class RecalibrationRequired : public Error {
 public:
  using Error::Error;
};

}  // namespace doseconf
