#pragma once

#include <stdexcept>
#include <string>

namespace maxcorr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the named operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (files, ids, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A gradient, parameter or loss became NaN/Inf.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::string diagnostic)
      : Error(what), diagnostic_(std::move(diagnostic)) {}

  const std::string& diagnostic() const noexcept { return diagnostic_; }

 private:
  std::string diagnostic_;
};

}  // namespace maxcorr
