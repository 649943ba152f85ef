#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ragqa {

enum class ErrorCode {
  InvalidArgument,
  EmptyText,
  DimensionZero,
  DimensionMismatch,
  ZeroVector,
  MissingRoute,
  DuplicateId,
  IoFailure,
  VersionMismatch,
  CorruptManifest,
  EmptyQuery,
  GeneratorFailure,
  SchemaError,
  TransformerFailure,
  TranslatorFailure,
  JudgeFailure,
  EmptyInput,
  MissingResponse,
  UnresolvedBallot,
  ConfigError,
  UnknownStore,
  BackendFailure,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above. Batch
// operations additionally report the offending element index.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace ragqa
