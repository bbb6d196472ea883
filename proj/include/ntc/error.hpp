#pragma once

#include <stdexcept>
#include <string>

namespace ntc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes, channel counts, or out-of-domain arguments.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or impossible denominators during evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated, or otherwise undecodable input data.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (empty supports, bad presets, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse such as a backward call with a mismatched tape.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Files that cannot be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <class E>
inline void require(bool cond, const std::string& message) {
  if (!cond) throw E(message);
}

}  // namespace detail
}  // namespace ntc
