#include "ragqa/error.hpp"

namespace ragqa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::DimensionZero: return "DimensionZero";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::MissingRoute: return "MissingRoute";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::GeneratorFailure: return "GeneratorFailure";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::TransformerFailure: return "TransformerFailure";
    case ErrorCode::TranslatorFailure: return "TranslatorFailure";
    case ErrorCode::JudgeFailure: return "JudgeFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingResponse: return "MissingResponse";
    case ErrorCode::UnresolvedBallot: return "UnresolvedBallot";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnknownStore: return "UnknownStore";
    case ErrorCode::BackendFailure: return "BackendFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> index)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), index_(index) {}

}  // namespace ragqa
