#pragma once

#include <stdexcept>
#include <string>

namespace covsketch {

// Base class for everything the library throws on bad input or
// numerically impossible requests. The CLI maps these to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

class InsufficientMeasurementsError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class UnsupportedRegimeError : public Error {
 public:
  using Error::Error;
};

// Numeric failures (as opposed to usage errors).
class NumericError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace covsketch
