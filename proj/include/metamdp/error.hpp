#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metamdp {

enum class ErrorCode {
  kInvalidConfig,
  kObserveUnavailable,
  kUnavailableComputation,
  kNodeObserved,
  kInconsistentClicks,
  kInvalidClick,
  kDegenerateData,
  kNonFinite,
  kMissingFit,
  kEmptyGroup,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for domain failures; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace metamdp
