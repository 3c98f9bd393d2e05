#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsseg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Timestamp or label annotations violate their contract.
class AnnotationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Binary file could not be parsed. Carries the byte offset of the failure.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : DataError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A computation produced NaN or Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsseg
