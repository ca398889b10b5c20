#pragma once

#include <stdexcept>
#include <string>

namespace sqft {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (r <= 2M, l < 0, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// Frequency too close to the mass threshold omega^2 = m^2.
class ThresholdError : public DomainError {
public:
  using DomainError::DomainError;
};

class SeedAccuracyError : public Error {
public:
  using Error::Error;
};

class StepSizeUnderflow : public Error {
public:
  using Error::Error;
};

class ResidualError : public Error {
public:
  using Error::Error;
};

class DegenerateModesError : public Error {
public:
  using Error::Error;
};

class InterpolationError : public Error {
public:
  using Error::Error;
};

class TruncationError : public Error {
public:
  using Error::Error;
};

class QuadratureError : public Error {
public:
  using Error::Error;
};

class BranchError : public Error {
public:
  using Error::Error;
};

class WindowTooSmall : public Error {
public:
  using Error::Error;
};

/// Invalid run configuration; `path` is the dotted key that failed validation.
class ConfigError : public Error {
public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

} // namespace sqft
