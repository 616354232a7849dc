#include "jointpiv/error.hpp"

namespace jointpiv {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::degenerate_projection: return "degenerate projection";
    case ErrorCode::back_projection_failure: return "back-projection failure";
    case ErrorCode::empty_ray: return "empty ray";
    case ErrorCode::underdetermined_fit: return "underdetermined fit";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::step_failure: return "step failure";
    case ErrorCode::io: return "i/o error";
  }
  return "unknown error";
}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace jointpiv
