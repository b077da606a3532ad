#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agriqa {

enum class ErrorCode {
  InvalidQuery,
  MissingSlot,
  ProviderNotFound,
  DuplicateProvider,
  UpstreamError,
  ScriptExhausted,
  StorageError,
  EntityNotFound,
  DuplicateTool,
  ToolNotFound,
  InvalidSequence,
  InvalidInput,
  ParseFailure,
  EpisodeFailed,
  InvalidReference,
  InvalidWeights,
  InvalidScore,
  MissingAnswer,
  InvalidConfig,
};

/// Stable machine-readable identifier, e.g. "invalid_query". Used in HTTP
/// error bodies and CLI diagnostics.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace agriqa
