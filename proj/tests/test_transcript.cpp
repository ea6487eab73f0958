#include "doctest.h"

#include "cogmark/error.hpp"
#include "cogmark/transcript.hpp"
#include "support.hpp"

using namespace cogmark;

namespace {

const char* kTwoSentences =
    "# text = the boy falls .\n"
    "1\tthe\tthe\tDET\t2\tdet\n"
    "2\tboy\tboy\tNOUN\t3\tnsubj\n"
    "3\tfalls\tfall\tVERB\t0\troot\n"
    "4\t.\t.\tPUNCT\t3\tpunct\n"
    "\n"
    "1\tum\tum\tINTJ\t4\tdiscourse\n"
    "2\tthe\tthe\tDET\t3\tdet\n"
    "3\tmother\tmother\tNOUN\t4\tnsubj\n"
    "4\tdries\tdry\tVERB\t0\troot\n"
    "5\tdishes\tdish\tNOUN\t4\tobj\n";

ErrorCode code_of(const std::string& text) {
  try {
    parse_transcript(text, "P", Task::kCtd, 10.0);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidConfig;
}

std::string manifest(const std::string& rows) { return std::string(kManifestHeader) + "\n" + rows; }

}  // namespace

TEST_CASE("transcript: two sentences, nine tokens") {
  const auto t = parse_transcript(kTwoSentences, "P001", Task::kCtd, 12.0);
  CHECK(t.sentences.size() == 2);
  CHECK(t.token_count() == 9);
  CHECK(t.sentences[0].ends_with_terminal_punct);
  CHECK_FALSE(t.sentences[1].ends_with_terminal_punct);
  CHECK(t.sentences[1].tokens[0].is_filler);
  CHECK_FALSE(t.sentences[1].tokens[1].is_filler);
  CHECK(t.participant_id == "P001");
  CHECK(t.duration_seconds == 12.0);
}

TEST_CASE("transcript: empty input has no sentences") {
  const auto t = parse_transcript("", "P", Task::kSf, 60.0);
  CHECK(t.sentences.empty());
  CHECK(parse_transcript("# only a comment\n\n\n", "P", Task::kSf, 60.0).sentences.empty());
}

TEST_CASE("transcript: structural errors") {
  CHECK(code_of("1\tx\tx\tNOUN\t1\troot\n") == ErrorCode::kBadHeadReference);
  CHECK(code_of("1\ta\ta\tNOUN\t2\tdep\n2\tb\tb\tNOUN\t1\tdep\n") == ErrorCode::kBadHeadReference);
  CHECK(code_of("1\ta\ta\tNOUN\t0\troot\n2\tb\tb\tNOUN\t0\troot\n") == ErrorCode::kBadHeadReference);
  CHECK(code_of("1\ta\ta\tNOUN\t5\tdep\n") == ErrorCode::kBadHeadReference);
  CHECK(code_of("1\ta\ta\tFOO\t0\troot\n") == ErrorCode::kUnknownUposTag);
  CHECK(code_of("1\ta\ta\tNOUN\t0\n") == ErrorCode::kMalformedLine);
  CHECK(code_of("2\ta\ta\tNOUN\t0\troot\n") == ErrorCode::kMalformedLine);
  CHECK(code_of("1-2\tdon't\t_\tX\t0\troot\n") == ErrorCode::kMalformedLine);
  CHECK_THROWS_AS(parse_transcript(kTwoSentences, "P", Task::kCtd, 0.0), Error);
  CHECK_THROWS_AS(parse_transcript(kTwoSentences, "P", Task::kCtd, -1.0), Error);
}

TEST_CASE("transcript: extra CoNLL-U columns are accepted") {
  const auto t = parse_transcript("1\tyes\tyes\tINTJ\t0\troot\t_\t_\t_\t_\n", "P", Task::kPf, 1.0);
  CHECK(t.token_count() == 1);
}

TEST_CASE("transcript: serialize round-trip") {
  const auto t = parse_transcript(kTwoSentences, "P", Task::kCtd, 12.0);
  const auto back = parse_transcript(serialize_transcript(t), "P", Task::kCtd, 12.0);
  CHECK(back == t);
  for (const auto& fx : test::feature_fixtures()) {
    const auto a = load_transcript(test::fixture_dir() / "transcripts" / fx.file, "F", Task::kCtd, fx.duration);
    CHECK(parse_transcript(serialize_transcript(a), "F", Task::kCtd, fx.duration) == a);
  }
}

TEST_CASE("transcript: filler lexicon is configurable and case-insensitive") {
  TranscriptOptions opts;
  opts.filler_lexicon = {"well"};
  const auto t = parse_transcript("1\tWell\twell\tINTJ\t0\troot\n", "P", Task::kCtd, 1.0, opts);
  CHECK(t.sentences[0].tokens[0].is_filler);
  const auto d = parse_transcript("1\tWell\twell\tINTJ\t0\troot\n", "P", Task::kCtd, 1.0);
  CHECK_FALSE(d.sentences[0].tokens[0].is_filler);
}

TEST_CASE("manifest: one complete participant") {
  const auto m = parse_manifest(manifest("P1,CTD,a.conllu,a.emb,60,HC,29\n"
                                         "P1,SF,b.conllu,,45.5,HC,29\n"
                                         "P1,PF,c.conllu,,50,HC,29\n"));
  CHECK(m.rows.size() == 3);
  CHECK(m.participant_ids().size() == 1);
  CHECK(m.rows[0].embedding_path == std::optional<std::string>("a.emb"));
  CHECK_FALSE(m.rows[1].embedding_path.has_value());
  CHECK(m.rows[1].duration_seconds == 45.5);
  CHECK(m.rows[2].diagnosis == Diagnosis::kHc);
  CHECK(m.rows[2].mmse == 29);
}

TEST_CASE("manifest: errors") {
  auto code = [](const std::string& text) {
    try {
      parse_manifest(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidConfig;
  };
  CHECK(code(manifest("P1,CTD,a,,60,HC,\nP1,CTD,b,,60,HC,\n")) == ErrorCode::kDuplicateTaskRow);
  CHECK(code(manifest("P1,CTD,a,,60,HC,31\n")) == ErrorCode::kMmseOutOfRange);
  CHECK(code(manifest("P1,CTD,a,,60,XX,\n")) == ErrorCode::kUnknownDiagnosisLabel);
  CHECK(code(manifest("P1,ABC,a,,60,HC,\n")) == ErrorCode::kUnknownTaskLabel);
  CHECK(code(manifest("P1,CTD,a,,60,HC,\nP1,SF,b,,60,AD,\n")) == ErrorCode::kInconsistentParticipant);
  CHECK(code("participant_id,task\nP1,CTD\n") == ErrorCode::kMissingColumn);
  CHECK(code(manifest("P1,CTD,a,,60\n")) == ErrorCode::kMalformedLine);
  CHECK(code(manifest("P1,CTD,a,,-3,HC,\n")) == ErrorCode::kMalformedLine);  // zero is a finding, not an error
}

TEST_CASE("manifest: serialize round-trip") {
  const auto m = parse_manifest(manifest("P2,CTD,t/P2_CTD.conllu,e/P2.emb,61.25,MCI,27\n"
                                         "P2,SF,t/P2_SF.conllu,,30,MCI,27\n"
                                         "P3,PF,t/P3_PF.conllu,,30,,\n"));
  const auto back = parse_manifest(serialize_manifest(m));
  CHECK(back.rows == m.rows);
}

TEST_CASE("validate_cohort: findings") {
  const auto m = parse_manifest(manifest("P1,CTD,a,,60,HC,\nP1,PF,c,,60,HC,\n"
                                         "P2,CTD,a,,60,AD,\nP2,SF,b,,60,AD,\nP2,PF,c,,60,AD,\n"));
  const auto v = validate_cohort(m, CohortMode::kClassification);
  REQUIRE(v.findings.size() == 1);
  CHECK(v.findings[0].participant_id == "P1");
  CHECK(v.findings[0].kind == FindingKind::kMissingTask);
  CHECK(v.findings[0].message.find("SF") != std::string::npos);
  CHECK(v.participant_count == 2);

  const auto full = parse_manifest(manifest("P2,CTD,a,,60,AD,\nP2,SF,b,,60,AD,\nP2,PF,c,,60,AD,\n"));
  CHECK(validate_cohort(full, CohortMode::kClassification).findings.empty());
  const auto reg = validate_cohort(full, CohortMode::kRegression);
  CHECK(reg.retained_count == 0);
  CHECK_FALSE(reg.findings.empty());
}

TEST_CASE("merge_manifests rejects overlap") {
  const auto a = parse_manifest(manifest("P1,CTD,a,,60,HC,\n"));
  const auto b = parse_manifest(manifest("P2,CTD,a,,60,HC,\n"));
  CHECK(merge_manifests(a, b).rows.size() == 2);
  CHECK_THROWS_AS(merge_manifests(a, a), Error);
}
