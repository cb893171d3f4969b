#pragma once

#include <stdexcept>
#include <string>

namespace vqg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is missing, malformed or out of range. `key()` holds
/// the dotted name (`rewards.lambda`) of the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class DegenerateConfigError : public Error {
 public:
  using Error::Error;
};

/// A token sequence is not a prefix (or leaf) of the question grammar.
class GrammarError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Operation is not valid in the current state (e.g. stepping a finished
/// session).
class ConflictError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vqg
