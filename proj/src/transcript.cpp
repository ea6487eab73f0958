#include "cogmark/transcript.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "cogmark/error.hpp"
#include "text_util.hpp"

namespace cogmark {

namespace detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "read failed for " + path.string());
  return contents;
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + path.string());
}

}  // namespace detail

namespace {

using detail::split;
using detail::split_lines;

std::string line_context(std::size_t line_no) { return "line " + std::to_string(line_no); }

AnnotatedToken parse_token_line(std::string_view line, std::size_t line_no, int expected_index) {
  const auto cols = split(line, '\t');
  if (cols.size() < 6 || cols.size() > 10) {
    throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": expected 6 to 10 tab-separated columns, got " +
                                               std::to_string(cols.size()));
  }
  const auto id = detail::parse_unsigned(cols[0]);
  if (!id || *id == 0) {
    throw Error(ErrorCode::kMalformedLine,
                line_context(line_no) + ": token id must be a positive integer (ranges and empty nodes are not supported)");
  }
  if (*id != expected_index) {
    throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": expected token id " +
                                               std::to_string(expected_index));
  }
  if (cols[1].empty() || cols[2].empty() || cols[5].empty()) {
    throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": empty FORM, LEMMA or DEPREL");
  }
  const auto upos = parse_upos(cols[3]);
  if (!upos) {
    throw Error(ErrorCode::kUnknownUposTag,
                line_context(line_no) + ": unknown UPOS tag '" + std::string(cols[3]) + "'");
  }
  const auto head = detail::parse_unsigned(cols[4]);
  if (!head) {
    throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": head must be a nonnegative integer");
  }
  if (*head == *id) {
    throw Error(ErrorCode::kBadHeadReference, line_context(line_no) + ": token is its own head");
  }
  AnnotatedToken token;
  token.index = static_cast<int>(*id);
  token.surface_form = std::string(cols[1]);
  token.lemma = std::string(cols[2]);
  token.upos = *upos;
  // Bounded by the 18-digit parse limit; the range check happens per sentence.
  token.head = *head > 1'000'000'000 ? 1'000'000'000 : static_cast<int>(*head);
  token.deprel = std::string(cols[5]);
  return token;
}

void finish_sentence(AnnotatedSentence& sentence, std::size_t line_no) {
  const int n = static_cast<int>(sentence.tokens.size());
  for (const auto& tok : sentence.tokens) {
    if (tok.head > n) {
      throw Error(ErrorCode::kBadHeadReference, "sentence ending before " + line_context(line_no) +
                                                    ": token " + std::to_string(tok.index) +
                                                    " points to missing head " + std::to_string(tok.head));
    }
  }
  try {
    validate_sentence_structure(sentence);
  } catch (const Error& e) {
    throw Error(e.code(), "sentence ending before " + line_context(line_no) + ": " + e.what());
  }
  const auto& last = sentence.tokens.back().surface_form;
  sentence.ends_with_terminal_punct = last == "." || last == "!" || last == "?";
}

bool filler_tag(Upos upos) { return upos == Upos::kIntj || upos == Upos::kX; }

}  // namespace

std::size_t AnnotatedTranscript::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

std::unordered_set<std::string> default_filler_lexicon() {
  return {"um", "uh", "er", "ah", "erm", "hm", "hmm", "mm", "uhm"};
}

void validate_sentence_structure(const AnnotatedSentence& sentence) {
  const int n = static_cast<int>(sentence.tokens.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const auto& tok = sentence.tokens[i];
    if (tok.index != i + 1) throw Error(ErrorCode::kMalformedLine, "token indices are not contiguous");
    if (tok.head < 0 || tok.head > n || tok.head == tok.index) {
      throw Error(ErrorCode::kBadHeadReference, "token " + std::to_string(tok.index) + " has invalid head");
    }
    if (tok.head == 0) ++roots;
  }
  if (roots != 1) {
    throw Error(ErrorCode::kBadHeadReference,
                "sentence has " + std::to_string(roots) + " roots, expected exactly one");
  }
  // 0 = unvisited, 1 = on current path, 2 = known to reach the root
  std::vector<int> state(n + 1, 0);
  state[0] = 2;
  for (int start = 1; start <= n; ++start) {
    std::vector<int> path;
    int cur = start;
    while (state[cur] == 0) {
      state[cur] = 1;
      path.push_back(cur);
      cur = sentence.tokens[cur - 1].head;
    }
    if (state[cur] == 1) {
      throw Error(ErrorCode::kBadHeadReference, "head cycle through token " + std::to_string(cur));
    }
    for (int v : path) state[v] = 2;
  }
}

AnnotatedTranscript parse_transcript(std::string_view text, std::string participant_id, Task task,
                                     double duration_seconds, const TranscriptOptions& options) {
  if (!(duration_seconds > 0.0) || !std::isfinite(duration_seconds)) {
    throw Error(ErrorCode::kNonPositiveDuration,
                "duration must be positive, got " + detail::format_real(duration_seconds));
  }
  AnnotatedTranscript transcript;
  transcript.participant_id = std::move(participant_id);
  transcript.task = task;
  transcript.duration_seconds = duration_seconds;

  text = detail::strip_bom(text);
  const auto lines = split_lines(text);
  AnnotatedSentence current;
  std::size_t line_no = 0;
  for (const auto line : lines) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    if (detail::is_blank(line)) {
      if (!current.tokens.empty()) {
        finish_sentence(current, line_no);
        transcript.sentences.push_back(std::move(current));
        current = {};
      }
      continue;
    }
    auto token = parse_token_line(line, line_no, static_cast<int>(current.tokens.size()) + 1);
    token.is_filler = filler_tag(token.upos) &&
                      options.filler_lexicon.contains(detail::to_lower(token.surface_form));
    current.tokens.push_back(std::move(token));
  }
  if (!current.tokens.empty()) {
    finish_sentence(current, line_no + 1);
    transcript.sentences.push_back(std::move(current));
  }
  return transcript;
}

AnnotatedTranscript parse_transcript(std::istream& in, std::string participant_id, Task task,
                                     double duration_seconds, const TranscriptOptions& options) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_transcript(buf.str(), std::move(participant_id), task, duration_seconds, options);
}

AnnotatedTranscript load_transcript(const std::filesystem::path& path, std::string participant_id,
                                    Task task, double duration_seconds,
                                    const TranscriptOptions& options) {
  return parse_transcript(detail::read_file(path), std::move(participant_id), task,
                          duration_seconds, options);
}

std::string serialize_transcript(const AnnotatedTranscript& transcript) {
  std::string out;
  bool first = true;
  for (const auto& sentence : transcript.sentences) {
    if (!first) out += '\n';
    first = false;
    for (const auto& tok : sentence.tokens) {
      out += std::to_string(tok.index);
      out += '\t';
      out += tok.surface_form;
      out += '\t';
      out += tok.lemma;
      out += '\t';
      out += upos_name(tok.upos);
      out += '\t';
      out += std::to_string(tok.head);
      out += '\t';
      out += tok.deprel;
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<std::string> CohortManifest::participant_ids() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (seen.insert(row.participant_id).second) ids.push_back(row.participant_id);
  }
  return ids;
}

std::filesystem::path CohortManifest::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

namespace {

constexpr std::size_t kManifestColumns = 7;

void check_participant_consistency(const std::vector<ManifestRow>& rows) {
  std::map<std::string, const ManifestRow*> first;
  std::set<std::pair<std::string, Task>> seen;
  for (const auto& row : rows) {
    if (!seen.emplace(row.participant_id, row.task).second) {
      throw Error(ErrorCode::kDuplicateTaskRow, "participant " + row.participant_id + " has more than one " +
                                                    std::string(task_name(row.task)) + " row");
    }
    auto [it, inserted] = first.emplace(row.participant_id, &row);
    if (!inserted && (it->second->diagnosis != row.diagnosis || it->second->mmse != row.mmse)) {
      throw Error(ErrorCode::kInconsistentParticipant,
                  "participant " + row.participant_id + " has conflicting diagnosis or mmse across rows");
    }
  }
}

}  // namespace

CohortManifest parse_manifest(std::string_view text) {
  text = detail::strip_bom(text);
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorCode::kMissingColumn, "manifest has no header");
  if (lines.front() != kManifestHeader) {
    const auto got = split(lines.front(), ',');
    const auto want = split(kManifestHeader, ',');
    std::string missing;
    for (const auto col : want) {
      if (std::find(got.begin(), got.end(), col) == got.end()) {
        if (!missing.empty()) missing += ',';
        missing += col;
      }
    }
    throw Error(ErrorCode::kMissingColumn,
                missing.empty() ? "header columns out of order; expected " + std::string(kManifestHeader)
                                : "header lacks column(s) " + missing);
  }

  CohortManifest manifest;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i];
    const std::size_t line_no = i + 1;
    if (detail::is_blank(line)) continue;
    const auto f = split(line, ',');
    if (f.size() != kManifestColumns) {
      throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": expected 7 fields, got " +
                                                 std::to_string(f.size()));
    }
    ManifestRow row;
    if (f[0].empty()) throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": empty participant_id");
    row.participant_id = std::string(f[0]);
    const auto task = parse_task(f[1]);
    if (!task) {
      throw Error(ErrorCode::kUnknownTaskLabel,
                  line_context(line_no) + ": unknown task '" + std::string(f[1]) + "'");
    }
    row.task = *task;
    if (f[2].empty()) throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": empty transcript_path");
    row.transcript_path = std::string(f[2]);
    if (!f[3].empty()) row.embedding_path = std::string(f[3]);
    const auto duration = detail::parse_real(f[4]);
    if (!duration || !std::isfinite(*duration) || *duration < 0.0) {
      throw Error(ErrorCode::kMalformedLine,
                  line_context(line_no) + ": duration_seconds must be a finite nonnegative number");
    }
    row.duration_seconds = *duration;
    if (!f[5].empty()) {
      const auto dx = parse_diagnosis(f[5]);
      if (!dx) {
        throw Error(ErrorCode::kUnknownDiagnosisLabel,
                    line_context(line_no) + ": unknown diagnosis '" + std::string(f[5]) + "'");
      }
      row.diagnosis = *dx;
    }
    if (!f[6].empty()) {
      const auto mmse = detail::parse_unsigned(f[6]);
      if (!mmse) {
        if (f[6].front() == '-' && detail::parse_unsigned(f[6].substr(1))) {
          throw Error(ErrorCode::kMmseOutOfRange, line_context(line_no) + ": mmse below 0");
        }
        throw Error(ErrorCode::kMalformedLine, line_context(line_no) + ": mmse must be an integer");
      }
      if (*mmse > 30) {
        throw Error(ErrorCode::kMmseOutOfRange,
                    line_context(line_no) + ": mmse " + std::string(f[6]) + " outside [0, 30]");
      }
      row.mmse = static_cast<int>(*mmse);
    }
    manifest.rows.push_back(std::move(row));
  }
  check_participant_consistency(manifest.rows);
  return manifest;
}

CohortManifest parse_manifest(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

CohortManifest load_manifest(const std::filesystem::path& path) {
  auto manifest = parse_manifest(detail::read_file(path));
  manifest.base_dir = path.parent_path();
  return manifest;
}

std::string serialize_manifest(const CohortManifest& manifest) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& row : manifest.rows) {
    out += row.participant_id;
    out += ',';
    out += task_name(row.task);
    out += ',';
    out += row.transcript_path;
    out += ',';
    out += row.embedding_path.value_or("");
    out += ',';
    out += detail::format_real(row.duration_seconds);
    out += ',';
    if (row.diagnosis) out += diagnosis_name(*row.diagnosis);
    out += ',';
    if (row.mmse) out += std::to_string(*row.mmse);
    out += '\n';
  }
  return out;
}

void write_manifest(const CohortManifest& manifest, const std::filesystem::path& path) {
  detail::write_file(path, serialize_manifest(manifest));
}

CohortManifest merge_manifests(const CohortManifest& a, const CohortManifest& b) {
  CohortManifest merged;
  for (const auto* src : {&a, &b}) {
    for (ManifestRow row : src->rows) {
      row.transcript_path = src->resolve(row.transcript_path).string();
      if (row.embedding_path) row.embedding_path = src->resolve(*row.embedding_path).string();
      merged.rows.push_back(std::move(row));
    }
  }
  check_participant_consistency(merged.rows);
  return merged;
}

// ---------------------------------------------------------------------------
// Cohort validation

std::string_view finding_kind_name(FindingKind kind) {
  switch (kind) {
    case FindingKind::kMissingTask: return "missing_task";
    case FindingKind::kMissingDiagnosis: return "missing_diagnosis";
    case FindingKind::kMissingMmse: return "missing_mmse";
    case FindingKind::kMissingEmbedding: return "missing_embedding";
    case FindingKind::kMissingTranscriptFile: return "missing_transcript_file";
    case FindingKind::kMissingEmbeddingFile: return "missing_embedding_file";
    case FindingKind::kNoSpeech: return "no_speech";
  }
  return "unknown";
}

bool CohortValidation::has_blocking() const {
  return std::any_of(findings.begin(), findings.end(), [](const auto& f) { return f.blocking; });
}

CohortValidation validate_cohort(const CohortManifest& manifest, CohortMode mode,
                                 const ValidationOptions& options) {
  CohortValidation result;
  std::map<std::string, std::vector<const ManifestRow*>> by_participant;
  for (const auto& row : manifest.rows) by_participant[row.participant_id].push_back(&row);
  const auto ids = manifest.participant_ids();
  result.participant_count = ids.size();

  auto add = [&](const std::string& id, FindingKind kind, std::string message, bool blocking) {
    result.findings.push_back({id, kind, std::move(message), blocking});
  };

  for (const auto& id : ids) {
    const auto& rows = by_participant[id];
    const ManifestRow& first = *rows.front();
    bool retained = true;

    if (mode == CohortMode::kRegression && !first.mmse) {
      // Filtered out of the regression set rather than treated as an error.
      add(id, FindingKind::kMissingMmse, "no mmse; excluded from regression", false);
      retained = false;
    }
    if (mode == CohortMode::kClassification && !first.diagnosis) {
      add(id, FindingKind::kMissingDiagnosis, "missing diagnosis label", true);
      retained = false;
    }
    if (!retained) continue;

    for (Task task : kAllTasks) {
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const auto* r) { return r->task == task; });
      if (it == rows.end()) {
        add(id, FindingKind::kMissingTask, "missing task " + std::string(task_name(task)), false);
        continue;
      }
      const ManifestRow& row = **it;
      if (row.duration_seconds <= 0.0) {
        add(id, FindingKind::kNoSpeech, std::string(task_name(task)) + " row has zero speech duration; excluded",
            false);
      }
      if (options.check_files && !std::filesystem::exists(manifest.resolve(row.transcript_path))) {
        add(id, FindingKind::kMissingTranscriptFile,
            "transcript file not found: " + manifest.resolve(row.transcript_path).string(), true);
      }
      if (options.require_embeddings && task == Task::kCtd) {
        if (!row.embedding_path) {
          add(id, FindingKind::kMissingEmbedding, "CTD row has no embedding_path", true);
        } else if (options.check_files && !std::filesystem::exists(manifest.resolve(*row.embedding_path))) {
          add(id, FindingKind::kMissingEmbeddingFile,
              "embedding file not found: " + manifest.resolve(*row.embedding_path).string(), true);
        }
      }
    }
    ++result.retained_count;
  }
  return result;
}

}  // namespace cogmark
