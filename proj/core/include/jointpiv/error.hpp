#pragma once

#include <stdexcept>
#include <string>

namespace jointpiv {

enum class ErrorCode {
  invalid_argument,
  degenerate_projection,
  back_projection_failure,
  empty_ray,
  underdetermined_fit,
  dimension_mismatch,
  step_failure,
  io,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code lets
/// callers (the CLI in particular) map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace jointpiv
