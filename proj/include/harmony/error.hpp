#pragma once

#include <stdexcept>
#include <string>

namespace harmony {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line or configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

// IO failures, malformed files, and inputs that violate a data contract.
class DataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace harmony
