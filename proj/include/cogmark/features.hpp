#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cogmark/transcript.hpp"
#include "cogmark/types.hpp"

namespace cogmark {

// Raw counts behind the ratio and rate features.
struct LinguisticCounts {
  long pronoun_count = 0;
  long definite_np_count = 0;
  long indefinite_np_count = 0;
  long filler_word_count = 0;
  long total_word_count = 0;
  long actual_word_count = 0;
  long adverbial_adjunct_count = 0;
  long total_sentence_count_punct = 0;
  long total_sentence_count_sentstruct = 0;
  long total_clause_count_minimal = 0;
  long total_clause_count_comprehensive = 0;
  long adjunct_clause_count = 0;

  LinguisticCounts& operator+=(const LinguisticCounts& other);
  bool operator==(const LinguisticCounts&) const = default;
};

// Counting rules. Every lexicon and relation set can be overridden.
struct FeatureRules {
  std::set<std::string> definite_determiners = {"the", "this", "that", "these", "those"};
  std::set<std::string> possessive_relations = {"nmod:poss", "poss"};
  std::set<std::string> subject_relations = {"nsubj", "nsubj:pass", "csubj", "expl"};
  std::set<std::string> clausal_relations = {"ccomp", "xcomp", "advcl", "acl", "acl:relcl", "csubj"};
  std::set<std::string> adverbial_relations = {"advmod", "advcl"};
  std::string adjunct_clause_relation = "advcl";
  // Applied to every DEPREL before matching (e.g. parser-specific labels).
  std::map<std::string, std::string> relation_mapping;
  bool include_fillers_in_total = true;
};

LinguisticCounts extract_counts(const AnnotatedTranscript& transcript, const FeatureRules& rules = {});

inline constexpr std::size_t kTaskFeatureCount = 14;
inline constexpr std::size_t kParticipantFeatureCount = 3 * kTaskFeatureCount;

enum class Feature : std::size_t {
  kDuration,
  kPronounRatio,
  kPercentDefinite,
  kPercentIndefinite,
  kTotalNpRate,
  kFillerWordRate,
  kTotalWordCountRate,
  kActiveInteraction,
  kAdverbialAdjunctRatioPunct,
  kAdverbialAdjunctRatioSentstruct,
  kTotalClauseRateMinimal,
  kTotalClauseRateComprehensive,
  kAdjunctClauseRatioMinimal,
  kAdjunctClauseRatioComprehensive,
};

const std::array<std::string_view, kTaskFeatureCount>& task_feature_names();

// Column names `<TASK>__<feature>` in CTD, SF, PF block order.
std::vector<std::string> participant_feature_names();
std::vector<std::string> task_feature_columns(Task task);

class TaskFeatureVector {
 public:
  // Throws NonFiniteFeature if any value is NaN or infinite.
  TaskFeatureVector(Task task, const std::array<double, kTaskFeatureCount>& values);

  static TaskFeatureVector zeros(Task task);

  Task task() const { return task_; }
  const std::array<double, kTaskFeatureCount>& values() const { return values_; }
  double operator[](Feature f) const { return values_[static_cast<std::size_t>(f)]; }

 private:
  Task task_;
  std::array<double, kTaskFeatureCount> values_;
};

struct FeatureComputation {
  TaskFeatureVector vector;
  int zero_denominator_count = 0;  // ratios that fell back to 0.0
};

FeatureComputation compute_features_detailed(Task task, const LinguisticCounts& counts,
                                             double duration_seconds);
TaskFeatureVector compute_features(Task task, const LinguisticCounts& counts, double duration_seconds);

struct ParticipantFeatureVector {
  std::string participant_id;
  std::array<double, kParticipantFeatureCount> values{};
};

enum class MissingTaskPolicy { kZeroFill, kReject };

struct AssembledVector {
  ParticipantFeatureVector vector;
  std::vector<std::string> warnings;
};

AssembledVector assemble_participant_vector(std::string participant_id,
                                            const std::map<Task, TaskFeatureVector>& per_task,
                                            MissingTaskPolicy policy = MissingTaskPolicy::kZeroFill);

// Generic id + named real columns table, used for feature tables.
struct FeatureTable {
  std::vector<std::string> columns;  // excludes participant_id
  std::vector<std::string> row_ids;
  std::vector<std::vector<double>> rows;
};

FeatureTable to_feature_table(const std::vector<ParticipantFeatureVector>& vectors);

std::size_t write_feature_table(const FeatureTable& table, std::ostream& out);
std::size_t write_feature_table(const std::vector<ParticipantFeatureVector>& vectors, std::ostream& out);
void save_feature_table(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable read_feature_table(std::string_view text);
FeatureTable load_feature_table(const std::filesystem::path& path);

}  // namespace cogmark
