#pragma once

#include <stdexcept>
#include <string>

namespace hybrec {

// Input rejected by a precondition check (shape mismatch, bad argument, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or missing data files. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The interaction list produced no edges.
class EmptyGraphError : public DataError {
 public:
  using DataError::DataError;
};

// A loss or finite-difference probe produced NaN/Inf. Maps to CLI exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hot-path serving was asked to use a cache built from different parameters.
class StaleCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hybrec
