#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hybridsim {

// Machine-readable error categories. The CLI prints `code: message` and maps
// kInvariantViolation to exit status 2, everything else to 1.
enum class ErrorCode {
  kParseError,
  kValidationError,
  kConfigNotFound,
  kNoRoute,
  kEmptyCatalog,
  kInvalidPlacement,
  kCapacityOutOfBounds,
  kInstanceTooLarge,
  kRankDeficient,
  kNoPublicNode,
  kNoStableCandidate,
  kDimensionMismatch,
  kInvariantViolation,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kValidationError: return "VALIDATION_ERROR";
    case ErrorCode::kConfigNotFound: return "CONFIG_NOT_FOUND";
    case ErrorCode::kNoRoute: return "NO_ROUTE";
    case ErrorCode::kEmptyCatalog: return "EMPTY_CATALOG";
    case ErrorCode::kInvalidPlacement: return "INVALID_PLACEMENT";
    case ErrorCode::kCapacityOutOfBounds: return "CAPACITY_OUT_OF_BOUNDS";
    case ErrorCode::kInstanceTooLarge: return "INSTANCE_TOO_LARGE";
    case ErrorCode::kRankDeficient: return "RANK_DEFICIENT";
    case ErrorCode::kNoPublicNode: return "NO_PUBLIC_NODE";
    case ErrorCode::kNoStableCandidate: return "NO_STABLE_CANDIDATE";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kInvariantViolation: return "INVARIANT_VIOLATION";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hybridsim
