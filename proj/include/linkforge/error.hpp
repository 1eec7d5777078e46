#pragma once

#include <stdexcept>
#include <string>

namespace linkforge {

enum class ErrorKind {
  dimension,
  invalid_argument,
  label,
  tape,
  state,
  non_finite,
  bounds,
  io,
  format,
  integrity,
  config,
  sampling,
  divergence,
  checkpoint,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::label: return "label error";
    case ErrorKind::tape: return "tape error";
    case ErrorKind::state: return "state error";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::bounds: return "bounds error";
    case ErrorKind::io: return "io error";
    case ErrorKind::format: return "format error";
    case ErrorKind::integrity: return "integrity error";
    case ErrorKind::config: return "config error";
    case ErrorKind::sampling: return "sampling error";
    case ErrorKind::divergence: return "training divergence";
    case ErrorKind::checkpoint: return "checkpoint error";
  }
  return "error";
}

/// Single exception type for the library; `kind()` tells callers which
/// contract was violated (the CLI maps kinds onto exit codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace linkforge
