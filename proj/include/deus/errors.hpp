#pragma once

#include <stdexcept>
#include <string>

namespace deus {

// Every contract violation surfaces as a subclass of deus::Error so callers
// (the CLI in particular) can map them to exit codes in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnsatisfiableComplexity : public Error {
 public:
  using Error::Error;
};

class UnknownSlot : public Error {
 public:
  using Error::Error;
};

class DivisionByZeroBudget : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class ModeMismatch : public Error {
 public:
  using Error::Error;
};

class PrefixTooShort : public Error {
 public:
  using Error::Error;
};

class InsufficientBins : public Error {
 public:
  using Error::Error;
};

class InsufficientLevels : public Error {
 public:
  using Error::Error;
};

// Malformed files: logs, model files, configs.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration or missing input: the CLI reports it as a usage error.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace deus
