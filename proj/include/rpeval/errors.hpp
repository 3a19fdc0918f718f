#pragma once

#include <stdexcept>
#include <string>

namespace rpeval {

/// Bad or inconsistent run configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that violates the corpus or prediction schema. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A judge backend failed after the retry policy was exhausted. CLI exit code 4.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, int attempts)
      : std::runtime_error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// Raised by backends for failures that may succeed on retry (timeouts, 429, 5xx).
class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by backends for failures a retry cannot fix (bad request, missing
/// fixture). Not retried; surfaced to callers as TransportError.
class PermanentBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by backends for credential problems. Never retried.
class AuthError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Caller broke an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace rpeval
