#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsvie {

enum class ErrorCode {
  NonFiniteCoefficient,
  EllipticityViolated,
  NonFiniteState,
  DegenerateInterval,
  GridMismatch,
  NonFiniteField,
  TridiagonalSingular,
  NoContraction,
  MaxIterExceeded,
  BadExponent,
  WindowOutsideGrid,
  PathOutsideDomain,
  MissingLowerTriangle,
  ConfigInvalid,
  ResourceLimit,
  IoError,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonFiniteCoefficient: return "NonFiniteCoefficient";
    case ErrorCode::EllipticityViolated: return "EllipticityViolated";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::DegenerateInterval: return "DegenerateInterval";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::TridiagonalSingular: return "TridiagonalSingular";
    case ErrorCode::NoContraction: return "NoContraction";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::BadExponent: return "BadExponent";
    case ErrorCode::WindowOutsideGrid: return "WindowOutsideGrid";
    case ErrorCode::PathOutsideDomain: return "PathOutsideDomain";
    case ErrorCode::MissingLowerTriangle: return "MissingLowerTriangle";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ResourceLimit: return "ResourceLimit";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace bsvie
