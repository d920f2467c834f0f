// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace componerf {

enum class ErrorCode {
  SyntaxError,
  ValidationError,
  UnknownTarget,
  InvariantViolation,
  WrongMode,
  ShapeMismatch,
  RegistryMismatch,
  Transport,
  ProtocolVersionMismatch,
  ProviderError,
  GuidanceFailure,
  NonFiniteGradient,
  IO,
  VersionMismatch,
  CacheVersionMismatch,
  MissingCache,
  MissingTarget,
  DecodeUnavailable,
  ConfigError,
};

std::string_view error_code_name(ErrorCode code);

/// Single exception type for the engine; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace componerf
