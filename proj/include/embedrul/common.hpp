#pragma once

#include <stdexcept>
#include <string>

namespace embedrul {

/// Failure categories surfaced by the library. The CLI maps these onto
/// distinct exit codes, so every throw site picks the most specific kind.
enum class ErrorKind {
  invalid_argument,    // caller violated a documented precondition
  invalid_state,       // object not ready for the requested operation
  parse_error,         // malformed input text (carries a line number)
  format_error,        // structurally valid text, semantically inconsistent
  insufficient_data,   // not enough rows/series to fit the requested object
  degenerate_data,     // data present but unusable (constant, empty result)
  training_diverged,   // non-finite loss or parameters during optimization
  numerical_error,     // linear algebra failure (singular system, no basis)
  config_error,        // bad or contradictory run configuration
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_state: return "invalid-state";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::format_error: return "format-error";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::degenerate_data: return "degenerate-data";
    case ErrorKind::training_diverged: return "training-diverged";
    case ErrorKind::numerical_error: return "numerical-error";
    case ErrorKind::config_error: return "config-error";
  }
  return "unknown";
}

}  // namespace embedrul
