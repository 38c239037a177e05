#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simdrift {

/// Base of every error the library throws. The CLI maps each subclass to an
/// exit code: ConfigError -> 2, BackendError -> 3, DataError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data_error"; }
};

/// A tabular source or schema does not match what was declared.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "schema_error"; }
};

/// Conditioning evidence has zero probability under the world model.
class DegenerateEvidenceError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "degenerate_evidence"; }
};

/// No records exist for a (persona, arm, question) cell.
class EmptyCellError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "empty_cell"; }
};

/// A write-once key was written again with a different value.
class ConflictError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "conflict"; }
};

class BackendError : public Error {
 public:
  BackendError(const std::string& what, std::vector<std::string> attempts = {})
      : Error(what), attempts_(std::move(attempts)) {}
  const char* kind() const noexcept override { return "backend_error"; }
  const std::vector<std::string>& attempts() const noexcept { return attempts_; }

 private:
  std::vector<std::string> attempts_;
};

}  // namespace simdrift
