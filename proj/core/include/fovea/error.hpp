#pragma once

#include <stdexcept>
#include <string>

namespace fovea {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid dimensions, sizes, or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or vector shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// File-format failures. Each subclass is a distinct, catchable condition.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// File is well formed but describes a different schema than expected.
/// `field()` names the offending header field.
class SchemaError : public FormatError {
 public:
  SchemaError(std::string field, const std::string& detail)
      : FormatError("schema mismatch in field '" + field + "': " + detail), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A command needs the output of a phase that has not run yet.
class MissingPrerequisiteError : public Error {
 public:
  using Error::Error;
};

/// An artifact was produced by a different configuration than the one in use.
class HashMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace fovea
