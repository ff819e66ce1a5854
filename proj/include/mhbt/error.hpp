#pragma once

#include <stdexcept>
#include <string>

namespace mhbt {

/// A caller broke a documented precondition (sizes, index ranges, non-finite input).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid configuration or hyperparameters, detected before any sampling starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File system or serialization failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

inline void require_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

inline std::string size_mismatch(const char* what, long expected, long actual) {
  return std::string(what) + ": expected size " + std::to_string(expected) + ", got " +
         std::to_string(actual);
}

}  // namespace detail
}  // namespace mhbt
