#pragma once

#include <stdexcept>
#include <string>

namespace topo3d {

// Values are part of the C ABI (see topo3d.h); keep in sync.
enum class ErrorCode : int {
  ok = 0,
  invalid_argument = 1,
  not_converged = 2,
  io = 3,
  bad_magic = 4,
  truncated = 5,
  version_mismatch = 6,
  invalid_config = 7,
  shape_mismatch = 8,
  non_finite = 9,
  internal = 10,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, const std::string& message,
                    ErrorCode code = ErrorCode::invalid_argument) {
  if (!cond) fail(code, message);
}

}  // namespace topo3d
