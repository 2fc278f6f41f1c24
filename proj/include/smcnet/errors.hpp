#pragma once

#include <stdexcept>
#include <string>

namespace smcnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or cube dimensions do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A binary stream does not hold a valid RDC1/SMCW payload.
class ParseError : public Error {
 public:
  enum class Kind { BadMagic, Truncated, DimensionOverflow, BadVersion, BadValue };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A manifest, config or split violates one of its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Configuration values are out of their admissible range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system failure, always carrying the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// API misuse such as calling backward() before forward().
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace smcnet
