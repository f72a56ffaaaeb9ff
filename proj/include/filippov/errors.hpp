#pragma once

#include <stdexcept>
#include <string>

namespace filippov {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A configuration / input problem (bad config key, malformed value, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// A numerical failure (non-finite value, divergence, ...).
struct NumericalError : Error {
  using Error::Error;
};

struct AmbiguousClassification : NumericalError {
  using NumericalError::NumericalError;
};

struct DivisionDegenerate : NumericalError {
  using NumericalError::NumericalError;
};

struct StepSizeUnderflow : NumericalError {
  using NumericalError::NumericalError;
};

struct MaxEventsExceeded : NumericalError {
  using NumericalError::NumericalError;
};

struct NoHit : NumericalError {
  using NumericalError::NumericalError;
};

struct NoReturn : NumericalError {
  using NumericalError::NumericalError;
};

struct NotGrazing : NumericalError {
  using NumericalError::NumericalError;
};

struct NoConvergence : NumericalError {
  using NumericalError::NumericalError;
};

struct NoCycle : NumericalError {
  using NumericalError::NumericalError;
};

struct NoBracket : NumericalError {
  using NumericalError::NumericalError;
};

struct HyperbolicityViolated : NumericalError {
  using NumericalError::NumericalError;
};

struct EventNotBracketed : NumericalError {
  using NumericalError::NumericalError;
};

struct IllConditioned : NumericalError {
  using NumericalError::NumericalError;
};

struct InconsistentDetection : NumericalError {
  using NumericalError::NumericalError;
};

struct RegionMismatch : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace filippov
