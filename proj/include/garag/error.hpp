#pragma once

#include <stdexcept>
#include <string>

namespace garag {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown operator names, missing tables, invalid rates.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (datasets, tables, results files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A relevance or generation backend failed; carries the instance it broke on.
class ScorerError : public Error {
 public:
  ScorerError(const std::string& message, std::string instance_id = "")
      : Error(instance_id.empty() ? message : message + " (instance " + instance_id + ")"),
        instance_id_(std::move(instance_id)) {}

  const std::string& instance_id() const { return instance_id_; }

 private:
  std::string instance_id_;
};

}  // namespace garag
