#pragma once

#include <stdexcept>
#include <string>

namespace diffpool {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API contract, e.g. passed a workspace from a different
// forward call or a trace recorded before the parameters changed.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Finite-difference oracle hit a non-finite function value.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace diffpool
