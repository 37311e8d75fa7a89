#pragma once

#include <stdexcept>
#include <string>

namespace ewt {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Precondition violations: bad sizes, out-of-range parameters, mismatched grids.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Numerical failures such as non-finite data or a filter bank that breaks
/// the real-output contract.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Malformed or unknown configuration keys and values.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File-system and codec failures.
class IoError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace ewt
