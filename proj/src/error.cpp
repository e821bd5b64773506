#include "topo3d/error.hpp"

namespace topo3d {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_converged: return "not_converged";
    case ErrorCode::io: return "io";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace topo3d
