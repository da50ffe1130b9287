#include "tdcc/error.hpp"

namespace tdcc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::Overflow: return "OVERFLOW";
    case ErrorCode::NotPsd: return "NOT_PSD";
    case ErrorCode::NotPd: return "NOT_PD";
    case ErrorCode::Degenerate: return "DEGENERATE";
    case ErrorCode::FilterBreakdown: return "FILTER_BREAKDOWN";
    case ErrorCode::Unimplemented: return "UNIMPLEMENTED";
    case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::Parse: return "PARSE";
    case ErrorCode::Io: return "IO";
  }
  return "UNKNOWN";
}

}  // namespace tdcc
