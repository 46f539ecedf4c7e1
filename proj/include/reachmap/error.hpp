#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reachmap {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidPose,
  kSpaceMismatch,
  kUnsupportedSpace,
  kDimensionMismatch,
  kSingleClass,
  kMixedLabels,
  kSamplingRejected,
  kDegenerateHull,
  kNotPositiveDefinite,
  kEmptyInput,
  kIo,
  kSchema,
};

std::string_view error_code_name(ErrorCode code);

// Every domain failure in the library is reported through this type; the CLI
// maps it onto exit code 1 with a "error:<code>:" prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reachmap
