#pragma once

#include <stdexcept>
#include <string>

namespace spherekick {

enum class Errc {
  invalid_truncation,
  dimension,
  dealiasing,
  non_mean_free,
  index,
  argument,
  precondition,
  alignment,
  blow_up,
  config,
  io,
  format,
};

const char* to_string(Errc code) noexcept;

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_truncation: return "invalid truncation";
    case Errc::dimension: return "dimension mismatch";
    case Errc::dealiasing: return "dealiasing";
    case Errc::non_mean_free: return "non-mean-free field";
    case Errc::index: return "index out of range";
    case Errc::argument: return "invalid argument";
    case Errc::precondition: return "precondition violated";
    case Errc::alignment: return "time alignment";
    case Errc::blow_up: return "blow-up";
    case Errc::config: return "config";
    case Errc::io: return "io";
    case Errc::format: return "format";
  }
  return "unknown";
}

}  // namespace spherekick
