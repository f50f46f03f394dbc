#pragma once

#include <stdexcept>
#include <string>

namespace council {

// Caller supplied something the contract rejects (bad dimension, negative sigma, unknown id).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation is not legal in the current state (dangling retrieval, action after terminal).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Transient provider failure; safe to retry.
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Expert backend failed after the retry policy was exhausted.
class ExpertUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Auth or configuration problem. Never retried.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace council
