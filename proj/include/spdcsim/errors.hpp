#pragma once

#include <stdexcept>
#include <string>

namespace spdcsim {

// Validation failures in configs and argument checks. CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Analyses that cannot produce a result from the given data. CLI exit code 3.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File read/write and parse failures. CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spdcsim
