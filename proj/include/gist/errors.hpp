#pragma once

#include <stdexcept>
#include <string>

namespace gist {

// Error taxonomy. The CLI maps each family to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid settings or an unsupported combination of options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (shape mismatch, out-of-range index, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace gist
