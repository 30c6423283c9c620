#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace perflaw {

// Stable identifiers; the string forms are part of the service wire format.
enum class ErrorCode {
  kInvalidInput,
  kNegativeLog,
  kOutOfScope,
  kPrecondition,
  kRankDeficient,
  kInfeasibleGamma,
  kUnsupportedWeights,
  kParse,
  kSchema,
  kIo,
};

constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "DOMAIN_INVALID_INPUT";
    case ErrorCode::kNegativeLog: return "DOMAIN_NEGATIVE_LOG";
    case ErrorCode::kOutOfScope: return "OUT_OF_SCOPE";
    case ErrorCode::kPrecondition: return "PRECONDITION_FAILED";
    case ErrorCode::kRankDeficient: return "RANK_DEFICIENT";
    case ErrorCode::kInfeasibleGamma: return "INFEASIBLE_GAMMA";
    case ErrorCode::kUnsupportedWeights: return "UNSUPPORTED_WEIGHTS";
    case ErrorCode::kParse: return "PARSE_ERROR";
    case ErrorCode::kSchema: return "SCHEMA_ERROR";
    case ErrorCode::kIo: return "IO_ERROR";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return perflaw::code_name(code_); }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail
}  // namespace perflaw
