#include "reachmap/error.hpp"

namespace reachmap {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidPose: return "invalid_pose";
    case ErrorCode::kSpaceMismatch: return "space_mismatch";
    case ErrorCode::kUnsupportedSpace: return "unsupported_space";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kSingleClass: return "single_class";
    case ErrorCode::kMixedLabels: return "mixed_labels";
    case ErrorCode::kSamplingRejected: return "sampling_rejected";
    case ErrorCode::kDegenerateHull: return "degenerate_hull";
    case ErrorCode::kNotPositiveDefinite: return "not_positive_definite";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kSchema: return "schema";
  }
  return "unknown";
}

}  // namespace reachmap
