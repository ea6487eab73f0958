#include "cogmark/types.hpp"

#include <array>

#include "cogmark/error.hpp"

namespace cogmark {

namespace {

constexpr std::array<std::string_view, 17> kUposNames = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
};

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kCtd: return "CTD";
    case Task::kSf: return "SF";
    case Task::kPf: return "PF";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view text) {
  for (Task t : kAllTasks) {
    if (task_name(t) == text) return t;
  }
  return std::nullopt;
}

std::string_view diagnosis_name(Diagnosis d) {
  switch (d) {
    case Diagnosis::kHc: return "HC";
    case Diagnosis::kMci: return "MCI";
    case Diagnosis::kAd: return "AD";
  }
  return "?";
}

std::optional<Diagnosis> parse_diagnosis(std::string_view text) {
  if (text == "HC") return Diagnosis::kHc;
  if (text == "MCI") return Diagnosis::kMci;
  if (text == "AD") return Diagnosis::kAd;
  return std::nullopt;
}

std::string_view upos_name(Upos tag) { return kUposNames[static_cast<std::size_t>(tag)]; }

std::optional<Upos> parse_upos(std::string_view text) {
  for (std::size_t i = 0; i < kUposNames.size(); ++i) {
    if (kUposNames[i] == text) return static_cast<Upos>(i);
  }
  return std::nullopt;
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kBadHeadReference: return "BadHeadReference";
    case ErrorCode::kUnknownUposTag: return "UnknownUposTag";
    case ErrorCode::kNonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kDuplicateTaskRow: return "DuplicateTaskRow";
    case ErrorCode::kMmseOutOfRange: return "MmseOutOfRange";
    case ErrorCode::kUnknownDiagnosisLabel: return "UnknownDiagnosisLabel";
    case ErrorCode::kUnknownTaskLabel: return "UnknownTaskLabel";
    case ErrorCode::kInconsistentParticipant: return "InconsistentParticipant";
    case ErrorCode::kNonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::kAllTasksMissing: return "AllTasksMissing";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kMissingEmbeddingFile: return "MissingEmbeddingFile";
    case ErrorCode::kInvalidDataset: return "InvalidDataset";
    case ErrorCode::kDegenerateDataset: return "DegenerateDataset";
    case ErrorCode::kDivergedTraining: return "DivergedTraining";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kChecksumFailure: return "ChecksumFailure";
    case ErrorCode::kNotAModelFile: return "NotAModelFile";
    case ErrorCode::kInvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorCode::kMixedTaskMembers: return "MixedTaskMembers";
    case ErrorCode::kUnknownConfigName: return "UnknownConfigName";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace cogmark
