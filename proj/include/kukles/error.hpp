#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kukles {

enum class ErrorCode {
  InvalidArgument,
  DegenerateQ,
  OnSection,
  StepFailure,
  NoReturn,
  Timeout,
  NewtonDiverged,
  Degenerate,
  NotAFocus,
  Insensitive,
  StepCollapse,
  NotASaddle,
  BranchEscaped,
  NoBracket,
  StageFailed,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateQ: return "DegenerateQ";
    case ErrorCode::OnSection: return "OnSection";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::NoReturn: return "NoReturn";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::NotAFocus: return "NotAFocus";
    case ErrorCode::Insensitive: return "Insensitive";
    case ErrorCode::StepCollapse: return "StepCollapse";
    case ErrorCode::NotASaddle: return "NotASaddle";
    case ErrorCode::BranchEscaped: return "BranchEscaped";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::StageFailed: return "StageFailed";
  }
  return "Unknown";
}

/// Domain error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kukles
