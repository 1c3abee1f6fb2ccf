#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agenticsum {

enum class ErrorKind {
  structural,    // malformed tensors, offsets, index sets
  config,        // parameter out of range
  capacity,      // prompt exceeds backend context
  transport,     // remote backend unreachable or returned a non-2xx status
  parse,         // model output does not follow the expected grammar
  validation,    // parsed value outside its allowed range
  degenerate,    // empty summary or empty revision
  precondition,  // caller violated an operation precondition
  undefined_test // statistic undefined for the given data
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::structural: return "structural";
    case ErrorKind::config: return "config";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::transport: return "transport";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::undefined_test: return "undefined_test";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure that keeps the offending payload for diagnostics.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(ErrorKind::parse, what), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace agenticsum
