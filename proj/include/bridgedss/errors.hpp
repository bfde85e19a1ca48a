#pragma once

#include <stdexcept>
#include <string>

namespace bdss {

/// Invalid configuration or input supplied by the caller (CLI exit code 1).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Instance or model schema does not match the one a model was trained on.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// An operation was called in a state its contract does not allow.
class PreconditionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NotFoundError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace bdss
