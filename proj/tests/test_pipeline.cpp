#include "doctest.h"

#include "cogmark/config.hpp"
#include "cogmark/error.hpp"
#include "cogmark/pipeline.hpp"
#include "cogmark/synth.hpp"
#include "support.hpp"

using namespace cogmark;

namespace {

CohortSpec small_spec() {
  CohortSpec s;
  s.train_counts = {12, 9, 6};
  s.dev_counts = {6, 4, 3};
  s.embedding_dim = 48;
  s.informative_dims = 8;
  s.frames = {2, 4};
  s.separation = 3.0;
  s.seed = 17;
  return s;
}

FeatureOptions small_features() {
  FeatureOptions o;
  o.embedding_dim = 48;
  return o;
}

PipelineConfig fast(PipelineConfig c) {
  c.grid_search = false;
  for (auto& m : c.members) {
    if (m.family == LearnerFamily::kRandomForest) m.hyperparameters["n_trees"] = 25;
    if (m.family == LearnerFamily::kNeuralNet) m.hyperparameters["epochs"] = 30;
    if (m.family == LearnerFamily::kGradientBoosting) m.hyperparameters["n_estimators"] = 30;
    if (m.family == LearnerFamily::kAdaBoost) m.hyperparameters["n_estimators"] = 20;
  }
  return c;
}

}  // namespace

TEST_CASE("pipeline: linguistic table and labels") {
  test::TempDir dir("pipe_feat");
  const auto cohort = gen_cohort(small_spec(), dir.path());
  const auto x = extract_linguistic_table(cohort.all, small_features());
  CHECK(x.table.columns == participant_feature_names());
  CHECK(x.table.rows.size() == 40);
  CHECK(x.warnings.empty());

  const auto sf = extract_linguistic_table(cohort.all, small_features(), Task::kSf);
  CHECK(sf.table.columns == task_feature_columns(Task::kSf));

  const auto cls = join_labels(x.table, cohort.all, TargetKind::kClassification);
  CHECK(cls.size() == 40);
  std::vector<std::string> dropped;
  const auto reg = join_labels(x.table, cohort.all, TargetKind::kRegression, &dropped);
  CHECK(reg.size() + dropped.size() == 40);
  CHECK(reg.size() == static_cast<std::size_t>(std::lround(40 * small_spec().mmse_fraction)));

  const auto emb = extract_embedding_table(cohort.all, small_features());
  CHECK(emb.table.columns.size() == 48);
  CHECK(emb.table.columns.front() == "emb_0000");
  CHECK(emb.table.rows.size() == 40);
}

TEST_CASE("pipeline: missing task policy") {
  test::TempDir dir("pipe_missing");
  const auto cohort = gen_cohort(small_spec(), dir.path());
  CohortManifest m = cohort.all;
  const auto victim = m.rows.front().participant_id;
  std::erase_if(m.rows, [&](const ManifestRow& r) { return r.participant_id == victim && r.task == Task::kSf; });
  const auto x = extract_linguistic_table(m, small_features());
  CHECK(x.table.rows.size() == 40);
  CHECK_FALSE(x.warnings.empty());
  const auto row = std::find(x.table.row_ids.begin(), x.table.row_ids.end(), victim) - x.table.row_ids.begin();
  for (std::size_t i = 14; i < 28; ++i) CHECK(x.table.rows[row][i] == 0.0);

  auto reject = small_features();
  reject.missing_task_policy = MissingTaskPolicy::kReject;
  CHECK_THROWS_AS(extract_linguistic_table(m, reject), Error);
}

TEST_CASE("pipeline: cls1 run writes a classification report") {
  test::TempDir dir("pipe_cls1");
  const auto cohort = gen_cohort(small_spec(), dir / "cohort");
  const auto config = fast(build_submission_config("cls1"));
  FitOptions fit;
  fit.seed = 3;
  const auto run = run_pipeline(config, cohort.train, cohort.dev, cohort.dev, small_features(), fit, dir / "out");
  REQUIRE(run.report.classification.has_value());
  CHECK_FALSE(run.report.rmse.has_value());
  CHECK(run.report.n == 13);
  long total = 0;
  for (const auto& row : run.report.classification->confusion) total += row[0] + row[1] + row[2];
  CHECK(total == 13);
  CHECK(std::filesystem::exists(dir / "out" / "predictions.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "model.bin"));
  const auto report = Json::parse(test::read_bytes(dir / "out" / "report.json"));
  CHECK(report["config"] == "cls1");

  const auto preds = parse_predictions(run.predictions);
  CHECK(preds.ids.size() == 13);
  const auto loaded = load_ensemble(run.model);
  CHECK(loaded.config.name == "cls1");
}

TEST_CASE("pipeline: reg3 run reports rmse only") {
  test::TempDir dir("pipe_reg3");
  const auto cohort = gen_cohort(small_spec(), dir.path());
  FitOptions fit;
  const auto run = run_pipeline(fast(build_submission_config("reg3")), cohort.train, cohort.dev, cohort.all,
                                small_features(), fit);
  CHECK(run.report.rmse.has_value());
  CHECK_FALSE(run.report.classification.has_value());
  const auto preds = parse_predictions(run.predictions);
  CHECK(preds.ids.size() == 40);
  for (const auto& v : preds.values) {
    const double y = std::stod(v);
    CHECK(y >= 0.0);
    CHECK(y <= 30.0);
  }
}

TEST_CASE("pipeline: same seed gives identical bytes regardless of threads") {
  test::TempDir dir("pipe_det");
  const auto cohort = gen_cohort(small_spec(), dir / "cohort");
  const auto config = fast(build_submission_config("cls3"));
  FitOptions a;
  a.seed = 5;
  FitOptions b = a;
  b.jobs = 3;
  auto opts = small_features();
  const auto r1 = run_pipeline(config, cohort.train, cohort.dev, cohort.dev, opts, a, dir / "one");
  opts.jobs = 3;
  const auto r2 = run_pipeline(config, cohort.train, cohort.dev, cohort.dev, opts, b, dir / "two");
  for (const char* f : {"predictions.csv", "report.json", "model.bin"}) {
    CAPTURE(f);
    CHECK(test::read_bytes(dir / "one" / f) == test::read_bytes(dir / "two" / f));
  }
  FitOptions c = a;
  c.seed = 6;
  const auto r3 = run_pipeline(config, cohort.train, cohort.dev, cohort.dev, small_features(), c);
  CHECK(r3.model != r1.model);
}

TEST_CASE("pipeline: cross validation") {
  test::TempDir dir("pipe_cv");
  const auto cohort = gen_cohort(small_spec(), dir.path());
  const auto x = extract_linguistic_table(cohort.all, small_features());
  const auto d = join_labels(x.table, cohort.all, TargetKind::kClassification);
  auto config = build_submission_config("cls1");
  config.members[0].grid = Json{{"n_trees", {5, 25}}};
  FitOptions fit;
  fit.k = 4;
  const auto cv = cross_validate(config, d, fit);
  CHECK(cv.report.per_fold.size() == 4);
  CHECK(cv.report.n == 40);
  REQUIRE(cv.members.size() == 1);
  REQUIRE(cv.members[0].grid.has_value());
  CHECK(cv.members[0].grid->cells.size() == 2);
  CHECK(cv.report.classification->macro_f1 > 0.6);
}

TEST_CASE("predictions: format, parse and evaluate") {
  EnsemblePrediction p;
  p.kind = TargetKind::kClassification;
  p.labels = {0, 2, 1};
  const auto text = format_predictions({"A", "B", "C"}, p);
  CHECK(text == "participant_id,prediction\nA,HC\nB,AD\nC,MCI\n");
  const auto parsed = parse_predictions(text);
  CHECK(parsed.values == std::vector<std::string>{"HC", "AD", "MCI"});

  const auto manifest = parse_manifest(std::string(kManifestHeader) +
                                       "\nA,CTD,a,,1,HC,\nB,CTD,b,,1,MCI,\nC,CTD,c,,1,MCI,\n");
  const auto r = evaluate_predictions(parsed, manifest, TargetKind::kClassification);
  CHECK(r.n == 3);
  CHECK(r.classification->confusion[1][2] == 1);
  CHECK_THROWS_AS(evaluate_predictions(parse_predictions("participant_id,prediction\nZ,HC\n"), manifest,
                                       TargetKind::kClassification),
                  Error);
  CHECK_THROWS_AS(parse_predictions("id,value\nA,HC\n"), Error);
}

TEST_CASE("run config") {
  const auto c = default_run_config();
  CHECK(run_config_from_json(to_json(c)).model_config == "cls1");
  CHECK_THROWS_AS(run_config_from_json(Json{{"nope", 1}}), Error);
  CHECK_THROWS_AS(run_config_from_json(Json{{"k", 1}}), Error);
  CHECK_THROWS_AS(run_config_from_json(Json{{"grids", {{"svm", Json::object()}}}}), Error);
  auto r = run_config_from_json(Json{{"model_config", "cls3"},
                                     {"grid_search", false},
                                     {"grids", {{"random_forest", {{"n_trees", {7}}}}}}});
  const auto p = resolve_pipeline_config(r);
  CHECK_FALSE(p.grid_search);
  CHECK(p.members[0].grid == Json{{"n_trees", {7}}});
  CHECK(p.members[1].grid == default_grid(LearnerFamily::kAdaBoost));
  r.model_config = "cls9";
  CHECK_THROWS_AS(resolve_pipeline_config(r), Error);
}
