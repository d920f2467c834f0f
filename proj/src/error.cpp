// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/error.hpp"

namespace componerf {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::RegistryMismatch: return "RegistryMismatch";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::ProtocolVersionMismatch: return "ProtocolVersionMismatch";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::GuidanceFailure: return "GuidanceFailure";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::IO: return "IO";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CacheVersionMismatch: return "CacheVersionMismatch";
    case ErrorCode::MissingCache: return "MissingCache";
    case ErrorCode::MissingTarget: return "MissingTarget";
    case ErrorCode::DecodeUnavailable: return "DecodeUnavailable";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace componerf
