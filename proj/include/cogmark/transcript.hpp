#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cogmark/types.hpp"

namespace cogmark {

struct AnnotatedToken {
  int index = 0;  // 1-based within the sentence
  std::string surface_form;
  std::string lemma;
  Upos upos = Upos::kX;
  int head = 0;  // 0 = root
  std::string deprel;
  bool is_filler = false;

  bool operator==(const AnnotatedToken&) const = default;
};

struct AnnotatedSentence {
  std::vector<AnnotatedToken> tokens;
  bool ends_with_terminal_punct = false;

  bool operator==(const AnnotatedSentence&) const = default;
};

struct AnnotatedTranscript {
  std::string participant_id;
  Task task = Task::kCtd;
  double duration_seconds = 0.0;
  std::vector<AnnotatedSentence> sentences;

  std::size_t token_count() const;
  bool operator==(const AnnotatedTranscript&) const = default;
};

// Surface forms (lowercase) treated as filled pauses.
std::unordered_set<std::string> default_filler_lexicon();

struct TranscriptOptions {
  std::unordered_set<std::string> filler_lexicon = default_filler_lexicon();
};

AnnotatedTranscript parse_transcript(std::string_view text, std::string participant_id, Task task,
                                     double duration_seconds,
                                     const TranscriptOptions& options = {});
AnnotatedTranscript parse_transcript(std::istream& in, std::string participant_id, Task task,
                                     double duration_seconds,
                                     const TranscriptOptions& options = {});
AnnotatedTranscript load_transcript(const std::filesystem::path& path, std::string participant_id,
                                    Task task, double duration_seconds,
                                    const TranscriptOptions& options = {});

// Six-column form; parse(serialize(t)) == t.
std::string serialize_transcript(const AnnotatedTranscript& transcript);

// Throws BadHeadReference unless the sentence has one root and no cycles.
void validate_sentence_structure(const AnnotatedSentence& sentence);

struct ManifestRow {
  std::string participant_id;
  Task task = Task::kCtd;
  std::string transcript_path;
  std::optional<std::string> embedding_path;
  double duration_seconds = 0.0;
  std::optional<Diagnosis> diagnosis;
  std::optional<int> mmse;

  bool operator==(const ManifestRow&) const = default;
};

struct CohortManifest {
  std::vector<ManifestRow> rows;
  // Relative paths in rows resolve against this directory.
  std::filesystem::path base_dir;

  std::vector<std::string> participant_ids() const;  // first-appearance order
  std::filesystem::path resolve(const std::string& path) const;
};

inline constexpr std::string_view kManifestHeader =
    "participant_id,task,transcript_path,embedding_path,duration_seconds,diagnosis,mmse";

CohortManifest parse_manifest(std::string_view text);
CohortManifest parse_manifest(std::istream& in);
CohortManifest load_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const CohortManifest& manifest);
void write_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

// Rows of `a` followed by rows of `b`; duplicate (participant, task) rejected.
// Paths are made absolute against each input's base directory.
CohortManifest merge_manifests(const CohortManifest& a, const CohortManifest& b);

enum class CohortMode { kClassification, kRegression };

enum class FindingKind {
  kMissingTask,
  kMissingDiagnosis,
  kMissingMmse,
  kMissingEmbedding,
  kMissingTranscriptFile,
  kMissingEmbeddingFile,
  kNoSpeech,
};

struct ValidationFinding {
  std::string participant_id;
  FindingKind kind;
  std::string message;
  bool blocking = false;
};

struct CohortValidation {
  std::vector<ValidationFinding> findings;
  std::size_t participant_count = 0;
  std::size_t retained_count = 0;  // participants usable in the given mode

  bool has_blocking() const;
};

struct ValidationOptions {
  bool check_files = false;  // stat transcript/embedding paths
  bool require_embeddings = false;
};

CohortValidation validate_cohort(const CohortManifest& manifest, CohortMode mode,
                                 const ValidationOptions& options = {});

std::string_view finding_kind_name(FindingKind kind);

}  // namespace cogmark
