#include "cogmark/features.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "cogmark/error.hpp"
#include "text_util.hpp"

namespace cogmark {

LinguisticCounts& LinguisticCounts::operator+=(const LinguisticCounts& o) {
  pronoun_count += o.pronoun_count;
  definite_np_count += o.definite_np_count;
  indefinite_np_count += o.indefinite_np_count;
  filler_word_count += o.filler_word_count;
  total_word_count += o.total_word_count;
  actual_word_count += o.actual_word_count;
  adverbial_adjunct_count += o.adverbial_adjunct_count;
  total_sentence_count_punct += o.total_sentence_count_punct;
  total_sentence_count_sentstruct += o.total_sentence_count_sentstruct;
  total_clause_count_minimal += o.total_clause_count_minimal;
  total_clause_count_comprehensive += o.total_clause_count_comprehensive;
  adjunct_clause_count += o.adjunct_clause_count;
  return *this;
}

namespace {

bool is_verbal(Upos upos) { return upos == Upos::kVerb || upos == Upos::kAux; }

const std::string& mapped(const std::string& deprel, const FeatureRules& rules) {
  if (rules.relation_mapping.empty()) return deprel;
  const auto it = rules.relation_mapping.find(deprel);
  return it == rules.relation_mapping.end() ? deprel : it->second;
}

LinguisticCounts count_sentence(const AnnotatedSentence& sentence, const FeatureRules& rules) {
  LinguisticCounts c;
  c.total_sentence_count_sentstruct = 1;
  c.total_sentence_count_punct = sentence.ends_with_terminal_punct ? 1 : 0;

  const auto& toks = sentence.tokens;
  const std::size_t n = toks.size();
  std::vector<const std::string*> rel(n);
  for (std::size_t i = 0; i < n; ++i) rel[i] = &mapped(toks[i].deprel, rules);

  std::vector<bool> definite_marker(n, false);
  std::vector<bool> has_subject(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const int head = toks[i].head;
    if (head == 0) continue;
    const std::size_t h = static_cast<std::size_t>(head - 1);
    if (*rel[i] == "det") {
      const std::string& word = toks[i].lemma == "_" ? toks[i].surface_form : toks[i].lemma;
      if (rules.definite_determiners.contains(detail::to_lower(word))) definite_marker[h] = true;
    }
    if (rules.possessive_relations.contains(*rel[i])) definite_marker[h] = true;
    if (rules.subject_relations.contains(*rel[i])) has_subject[h] = true;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& tok = toks[i];
    const std::string& r = *rel[i];
    const bool head_verbal = tok.head > 0 && is_verbal(toks[tok.head - 1].upos);

    if (tok.upos != Upos::kPunct) {
      if (tok.is_filler) {
        ++c.filler_word_count;
        if (rules.include_fillers_in_total) ++c.total_word_count;
      } else {
        ++c.total_word_count;
      }
    }
    if (!tok.is_filler) {
      if (tok.upos == Upos::kPron) ++c.pronoun_count;
      if (tok.upos == Upos::kNoun || tok.upos == Upos::kPropn) {
        if (tok.upos == Upos::kPropn || definite_marker[i]) {
          ++c.definite_np_count;
        } else {
          ++c.indefinite_np_count;
        }
      }
    }
    if (rules.adverbial_relations.contains(r) && head_verbal) ++c.adverbial_adjunct_count;

    const bool minimal_clause = has_subject[i] || (tok.head == 0 && is_verbal(tok.upos));
    const bool extra_clause = rules.clausal_relations.contains(r) || (r == "conj" && head_verbal);
    if (minimal_clause) ++c.total_clause_count_minimal;
    if (minimal_clause || extra_clause) ++c.total_clause_count_comprehensive;
    if (r == rules.adjunct_clause_relation) ++c.adjunct_clause_count;
  }
  c.actual_word_count = rules.include_fillers_in_total ? c.total_word_count - c.filler_word_count
                                                       : c.total_word_count;
  return c;
}

constexpr std::array<std::string_view, kTaskFeatureCount> kFeatureNames = {
    "duration",
    "pronoun_ratio",
    "percent_definite",
    "percent_indefinite",
    "total_np_rate",
    "filler_word_rate",
    "total_word_count_rate",
    "active_interaction",
    "adverbial_adjunct_ratio_punct",
    "adverbial_adjunct_ratio_sentstruct",
    "total_clause_rate_minimal",
    "total_clause_rate_comprehensive",
    "adjunct_clause_ratio_minimal",
    "adjunct_clause_ratio_comprehensive",
};

}  // namespace

LinguisticCounts extract_counts(const AnnotatedTranscript& transcript, const FeatureRules& rules) {
  LinguisticCounts total;
  for (const auto& sentence : transcript.sentences) total += count_sentence(sentence, rules);
  return total;
}

const std::array<std::string_view, kTaskFeatureCount>& task_feature_names() { return kFeatureNames; }

std::vector<std::string> task_feature_columns(Task task) {
  std::vector<std::string> names;
  for (const auto name : kFeatureNames) {
    names.push_back(std::string(task_name(task)) + "__" + std::string(name));
  }
  return names;
}

std::vector<std::string> participant_feature_names() {
  std::vector<std::string> names;
  for (Task task : kAllTasks) {
    auto block = task_feature_columns(task);
    names.insert(names.end(), block.begin(), block.end());
  }
  return names;
}

TaskFeatureVector::TaskFeatureVector(Task task, const std::array<double, kTaskFeatureCount>& values)
    : task_(task), values_(values) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kNonFiniteFeature, std::string(task_name(task)) + "__" +
                                                    std::string(kFeatureNames[i]) + " is not finite");
    }
  }
}

TaskFeatureVector TaskFeatureVector::zeros(Task task) { return TaskFeatureVector(task, {}); }

FeatureComputation compute_features_detailed(Task task, const LinguisticCounts& c, double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw Error(ErrorCode::kNonPositiveDuration, "duration must be positive, got " + detail::format_real(duration));
  }
  int zero_denominators = 0;
  auto ratio = [&](long num, long den) {
    if (den == 0) {
      ++zero_denominators;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  auto rate = [&](long num) { return static_cast<double>(num) / duration; };

  const long np_total = c.pronoun_count + c.definite_np_count + c.indefinite_np_count;
  std::array<double, kTaskFeatureCount> v{};
  v[0] = duration;
  v[1] = ratio(c.pronoun_count, np_total);
  v[2] = ratio(c.definite_np_count, np_total);
  v[3] = ratio(c.indefinite_np_count, np_total);
  v[4] = rate(np_total);
  v[5] = rate(c.filler_word_count);
  v[6] = rate(c.total_word_count);
  v[7] = ratio(c.actual_word_count, c.total_word_count);
  v[8] = ratio(c.adverbial_adjunct_count, c.total_sentence_count_punct);
  v[9] = ratio(c.adverbial_adjunct_count, c.total_sentence_count_sentstruct);
  v[10] = rate(c.total_clause_count_minimal);
  v[11] = rate(c.total_clause_count_comprehensive);
  v[12] = ratio(c.adjunct_clause_count, c.total_clause_count_minimal);
  v[13] = ratio(c.adjunct_clause_count, c.total_clause_count_comprehensive);
  return {TaskFeatureVector(task, v), zero_denominators};
}

TaskFeatureVector compute_features(Task task, const LinguisticCounts& counts, double duration_seconds) {
  return compute_features_detailed(task, counts, duration_seconds).vector;
}

AssembledVector assemble_participant_vector(std::string participant_id,
                                            const std::map<Task, TaskFeatureVector>& per_task,
                                            MissingTaskPolicy policy) {
  if (per_task.empty()) {
    throw Error(ErrorCode::kAllTasksMissing, "participant " + participant_id + " has no task features");
  }
  AssembledVector out;
  out.vector.participant_id = std::move(participant_id);
  for (std::size_t block = 0; block < kAllTasks.size(); ++block) {
    const Task task = kAllTasks[block];
    const auto it = per_task.find(task);
    if (it == per_task.end()) {
      if (policy == MissingTaskPolicy::kReject) {
        throw Error(ErrorCode::kAllTasksMissing, "participant " + out.vector.participant_id + " lacks task " +
                                                     std::string(task_name(task)));
      }
      out.warnings.push_back("participant " + out.vector.participant_id + ": task " +
                             std::string(task_name(task)) + " missing, block zero-filled");
      continue;  // values are already zero
    }
    const auto& values = it->second.values();
    std::copy(values.begin(), values.end(), out.vector.values.begin() + block * kTaskFeatureCount);
  }
  return out;
}

FeatureTable to_feature_table(const std::vector<ParticipantFeatureVector>& vectors) {
  FeatureTable table;
  table.columns = participant_feature_names();
  for (const auto& v : vectors) {
    table.row_ids.push_back(v.participant_id);
    table.rows.emplace_back(v.values.begin(), v.values.end());
  }
  return table;
}

std::size_t write_feature_table(const FeatureTable& table, std::ostream& out) {
  out << "participant_id";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out << table.row_ids[r];
    for (double v : table.rows[r]) out << ',' << detail::format_real(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing feature table");
  return table.rows.size();
}

std::size_t write_feature_table(const std::vector<ParticipantFeatureVector>& vectors, std::ostream& out) {
  return write_feature_table(to_feature_table(vectors), out);
}

void save_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_feature_table(table, buf);
  detail::write_file(path, buf.str());
}

FeatureTable read_feature_table(std::string_view text) {
  const auto lines = detail::split_lines(detail::strip_bom(text));
  if (lines.empty()) throw Error(ErrorCode::kMissingColumn, "feature table has no header");
  const auto header = detail::split(lines[0], ',');
  if (header.empty() || header[0] != "participant_id") {
    throw Error(ErrorCode::kMissingColumn, "feature table must start with participant_id");
  }
  FeatureTable table;
  for (std::size_t i = 1; i < header.size(); ++i) table.columns.emplace_back(header[i]);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::is_blank(lines[i])) continue;
    const auto fields = detail::split(lines[i], ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kMalformedLine, "feature table line " + std::to_string(i + 1) + ": expected " +
                                                 std::to_string(header.size()) + " fields");
    }
    table.row_ids.emplace_back(fields[0]);
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const auto v = detail::parse_real(fields[j]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::kMalformedLine, "feature table line " + std::to_string(i + 1) +
                                                   ": bad value in column " + table.columns[j - 1]);
      }
      row.push_back(*v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
  return read_feature_table(detail::read_file(path));
}

}  // namespace cogmark
