#pragma once

#include <stdexcept>
#include <string>

namespace ranslice {

// Invalid scenario, parameter or precondition supplied by the caller.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing external trace data.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical or I/O failure while a run is in progress.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Programming error at an internal interface (mismatched lengths, missing inputs).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void expects(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace ranslice
