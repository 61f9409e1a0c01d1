#pragma once

#include <stdexcept>
#include <string>

namespace ghztomo {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NotHermitian,
  NotPhysical,
  DegenerateProjection,
  MissingData,
  Parse,
};

// Single exception type for the library; callers branch on code().
class TomoError : public std::runtime_error {
 public:
  TomoError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ghztomo
