#include "agriqa/error.hpp"

namespace agriqa {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidQuery: return "invalid_query";
    case ErrorCode::MissingSlot: return "missing_slot";
    case ErrorCode::ProviderNotFound: return "provider_not_found";
    case ErrorCode::DuplicateProvider: return "duplicate_provider";
    case ErrorCode::UpstreamError: return "upstream_error";
    case ErrorCode::ScriptExhausted: return "script_exhausted";
    case ErrorCode::StorageError: return "storage_error";
    case ErrorCode::EntityNotFound: return "entity_not_found";
    case ErrorCode::DuplicateTool: return "duplicate_tool";
    case ErrorCode::ToolNotFound: return "tool_not_found";
    case ErrorCode::InvalidSequence: return "invalid_sequence";
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::ParseFailure: return "parse_failure";
    case ErrorCode::EpisodeFailed: return "episode_failed";
    case ErrorCode::InvalidReference: return "invalid_reference";
    case ErrorCode::InvalidWeights: return "invalid_weights";
    case ErrorCode::InvalidScore: return "invalid_score";
    case ErrorCode::MissingAnswer: return "missing_answer";
    case ErrorCode::InvalidConfig: return "invalid_config";
  }
  return "unknown";
}

}  // namespace agriqa
