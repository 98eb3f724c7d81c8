#pragma once

#include <stdexcept>
#include <string>

namespace idmgym {

/// Base for every error raised by the library. Callers that only want to
/// report a failure can catch this; the subclasses name the failure class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite, out-of-range or otherwise invalid numeric input.
class InputDomainError : public Error {
 public:
  using Error::Error;
};

/// IDM interaction term requested with a non-positive gap.
class SingularGapError : public Error {
 public:
  using Error::Error;
};

/// Zero-variance series handed to a statistic that divides by the variance.
class DegenerateSeriesError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. The message carries the file and, for CSV, the row.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid input whose cross references or invariants do not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// API called in a state that does not allow it (e.g. step after termination).
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace idmgym
