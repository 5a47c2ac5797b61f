// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace infograd {

enum class ErrorCode {
  CycleDetected,
  DanglingParent,
  DimMismatch,
  ShapeMismatch,
  InvalidSpec,
  ConfigParse,
  EmptyBatch,
  NonlinearNode,
  SingularCovariance,
  DegenerateMoment,
  NonFiniteScore,
  NonFiniteLoss,
  NonFiniteGradient,
  EmptyDataset,
  GridTooNarrow,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DanglingParent: return "DanglingParent";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NonlinearNode: return "NonlinearNode";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DegenerateMoment: return "DegenerateMoment";
    case ErrorCode::NonFiniteScore: return "NonFiniteScore";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::GridTooNarrow: return "GridTooNarrow";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace infograd
