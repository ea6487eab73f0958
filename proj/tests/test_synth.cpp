#include "doctest.h"

#include <cmath>
#include <numeric>

#include "cogmark/embedding.hpp"
#include "cogmark/error.hpp"
#include "cogmark/pipeline.hpp"
#include "cogmark/synth.hpp"
#include "support.hpp"

using namespace cogmark;
namespace fs = std::filesystem;

namespace {

std::size_t count_files(const fs::path& dir) {
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}));
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = test::read_bytes(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("synth: default cohort shape") {
  test::TempDir dir("synth_default");
  const CohortSpec spec;
  const auto cohort = gen_cohort(spec, dir.path());
  CHECK(cohort.all.participant_ids().size() == 157);
  CHECK(cohort.train.participant_ids().size() == 117);
  CHECK(cohort.dev.participant_ids().size() == 40);
  CHECK(count_files(dir / "transcripts") == 471);
  CHECK(count_files(dir / "embeddings") == 157);

  std::array<int, 3> train_classes{}, dev_classes{};
  std::vector<int> mmse;
  for (const auto& row : cohort.all.rows) {
    if (row.task != Task::kCtd) continue;
    const bool in_train = row.participant_id <= "P117";
    (in_train ? train_classes : dev_classes)[static_cast<int>(*row.diagnosis)]++;
    if (row.mmse) mmse.push_back(*row.mmse);
  }
  CHECK(train_classes == std::array<int, 3>{61, 44, 12});
  CHECK(dev_classes == std::array<int, 3>{21, 15, 4});
  CHECK(mmse.size() == 69);
  for (int m : mmse) {
    CHECK(m >= 19);
    CHECK(m <= 30);
  }
  const double mean = std::accumulate(mmse.begin(), mmse.end(), 0.0) / mmse.size();
  CHECK(mean >= 26.0);
  CHECK(mean <= 28.5);

  const auto reg = validate_cohort(cohort.all, CohortMode::kRegression, {.check_files = true});
  CHECK(reg.retained_count == 69);
  const auto cls = validate_cohort(cohort.all, CohortMode::kClassification, {.check_files = true, .require_embeddings = true});
  CHECK(cls.findings.empty());

  // Every generated transcript parses and passes structure checks.
  for (const auto& row : cohort.all.rows) {
    const auto t = load_transcript(cohort.all.resolve(row.transcript_path), row.participant_id, row.task,
                                   row.duration_seconds);
    CHECK(t.token_count() > 0);
  }
}

TEST_CASE("synth: pooled embedding class means match their targets") {
  test::TempDir dir("synth_means");
  CohortSpec spec;
  spec.embedding_dim = 96;
  spec.separation = 2.0;
  spec.seed = 4;
  const auto cohort = gen_cohort(spec, dir.path());
  FeatureOptions opts;
  opts.embedding_dim = 96;
  const auto x = extract_embedding_table(cohort.all, opts);
  const auto d = join_labels(x.table, cohort.all, TargetKind::kClassification);

  int outside = 0;
  for (int c = 0; c < 3; ++c) {
    const auto target = class_embedding_mean(spec, static_cast<Diagnosis>(c));
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == c) rows.push_back(i);
    }
    const double n = static_cast<double>(rows.size());
    // Each 16-dim block averaged: one statistic with a small standard error.
    for (std::size_t block = 0; block < 96 / 16; ++block) {
      double sum = 0.0, sq = 0.0, want = 0.0;
      for (std::size_t j = block * 16; j < block * 16 + 16; ++j) {
        want += target[j] / 16.0;
        for (auto r : rows) {
          sum += d.x(r, j);
          sq += d.x(r, j) * d.x(r, j);
        }
      }
      const double m = sum / (n * 16.0);
      const double var = sq / (n * 16.0) - m * m;
      const double se = std::sqrt(var / (n * 16.0));
      CAPTURE(c);
      CAPTURE(block);
      CHECK(std::abs(m - want) <= 3.0 * se);
    }
    // Per dimension, about 0.3% should fall outside 3 SE by chance.
    for (int j = 0; j < 96; ++j) {
      double sum = 0.0, sq = 0.0;
      for (auto r : rows) {
        sum += d.x(r, j);
        sq += d.x(r, j) * d.x(r, j);
      }
      const double m = sum / n;
      const double se = std::sqrt((sq / n - m * m) / n);
      outside += std::abs(m - target[j]) > 3.0 * se;
    }
  }
  CHECK(outside <= 3);
}

TEST_CASE("synth: separation 0 leaves no class signal in embeddings") {
  CohortSpec spec;
  spec.separation = 0.0;
  const auto hc = class_embedding_mean(spec, Diagnosis::kHc);
  CHECK(hc == class_embedding_mean(spec, Diagnosis::kMci));
  CHECK(hc == class_embedding_mean(spec, Diagnosis::kAd));
  spec.separation = 1.0;
  CHECK(class_embedding_mean(spec, Diagnosis::kHc) != class_embedding_mean(spec, Diagnosis::kAd));
}

TEST_CASE("synth: same seed gives a byte-identical corpus") {
  test::TempDir dir("synth_det");
  CohortSpec spec;
  spec.train_counts = {5, 4, 3};
  spec.dev_counts = {2, 2, 1};
  spec.embedding_dim = 64;
  spec.seed = 9;
  gen_cohort(spec, dir / "a", 1);
  gen_cohort(spec, dir / "b", 3);
  CHECK(snapshot(dir / "a") == snapshot(dir / "b"));
  spec.seed = 10;
  gen_cohort(spec, dir / "c", 1);
  CHECK(snapshot(dir / "a") != snapshot(dir / "c"));
}

TEST_CASE("synth: spec JSON") {
  CohortSpec spec;
  spec.separation = 2.5;
  const auto back = cohort_spec_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  CHECK_THROWS_AS(cohort_spec_from_json(Json{{"separation", -1.0}}), Error);
  CHECK_THROWS_AS(cohort_spec_from_json(Json{{"mmse_fraction", 1.5}}), Error);
  CHECK_THROWS_AS(cohort_spec_from_json(Json{{"colour", "red"}}), Error);
}

TEST_CASE("synth: regression signal") {
  test::TempDir dir("synth_reg");
  CohortSpec spec;
  spec.embedding_dim = 48;
  spec.informative_dims = 8;
  auto signal = default_regression_signal();
  CHECK(signal.coefficients.size() == 42);
  signal.noise_sigma = 0.0;
  const auto r = gen_regression_signal(spec, signal, dir.path());
  CHECK(fs::exists(dir / "ground_truth.json"));
  CHECK(r.ground_truth.contains("intercept"));

  const auto manifest = load_manifest(dir / "manifest.csv");
  const auto x = extract_linguistic_table(manifest, FeatureOptions{});
  const auto d = join_labels(x.table, manifest, TargetKind::kRegression);
  CHECK(d.size() == 69);
  for (double y : d.targets) {
    CHECK(y >= spec.mmse_range[0]);
    CHECK(y <= spec.mmse_range[1]);
    CHECK(y == std::round(y));
  }
  CHECK_THROWS_AS(gen_regression_signal(spec, RegressionSignal{26.0, std::vector<double>(41, 0.0), 1.0}, dir / "x"),
                  Error);
}
