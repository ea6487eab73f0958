#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cogmark {

enum class ErrorCode {
  kMalformedLine,
  kBadHeadReference,
  kUnknownUposTag,
  kNonPositiveDuration,
  kMissingColumn,
  kDuplicateTaskRow,
  kMmseOutOfRange,
  kUnknownDiagnosisLabel,
  kUnknownTaskLabel,
  kInconsistentParticipant,
  kNonFiniteFeature,
  kAllTasksMissing,
  kIoFailure,
  kDimensionMismatch,
  kNonFiniteValue,
  kEmptyMatrix,
  kMissingEmbeddingFile,
  kInvalidDataset,
  kDegenerateDataset,
  kDivergedTraining,
  kSchemaMismatch,
  kVersionMismatch,
  kChecksumFailure,
  kNotAModelFile,
  kInvalidHyperparameter,
  kMixedTaskMembers,
  kUnknownConfigName,
  kLengthMismatch,
  kEmptyInput,
  kTooFewSamples,
  kInvalidConfig,
};

std::string_view error_code_name(ErrorCode code);

// Every failure the library reports on bad input is one of these.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cogmark
