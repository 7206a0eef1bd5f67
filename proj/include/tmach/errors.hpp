#pragma once

#include <stdexcept>
#include <string>

namespace tmach {

/// Shapes or lengths of arguments do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data could not be read or violates a data contract.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An optimizer or factorization could not produce a usable result.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tmach
