#pragma once

#include <stdexcept>
#include <string>

namespace zk3col {

enum class ErrorCode {
  invalid_argument,
  parse_error,
  protocol_violation,
  exhausted,
  timeout,
  sequence_gap,
  io_error,
  integrity,
  insufficient_data,
  gated,
  wrong_phase,
  forbidden,
  not_found,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::protocol_violation: return "protocol_violation";
    case ErrorCode::exhausted: return "exhausted";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::sequence_gap: return "sequence_gap";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::gated: return "gated";
    case ErrorCode::wrong_phase: return "wrong_phase";
    case ErrorCode::forbidden: return "forbidden";
    case ErrorCode::not_found: return "not_found";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace zk3col
