// Command-line front end: cogmark <subcommand> [options]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cogmark/config.hpp"
#include "cogmark/embedding.hpp"
#include "cogmark/error.hpp"
#include "cogmark/eval.hpp"
#include "cogmark/features.hpp"
#include "cogmark/pipeline.hpp"
#include "cogmark/synth.hpp"
#include "cogmark/transcript.hpp"

namespace fs = std::filesystem;
using namespace cogmark;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Raised for a failed check that is not a library error (e.g. blocking findings).
struct ValidationFailed {};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void dump(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

void warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning\t" << w << "\n";
}

// Flags shared by every subcommand. Anything given on the command line wins
// over the --config file.
struct Flags {
  std::string config;
  std::string manifest, dev_manifest, test_manifest, out, task, features, model_config;
  std::optional<int> k;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool no_grid = false;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "run config JSON (or a submission config name)");
  app->add_option("--seed", f.seed, "run seed");
  app->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
}

RunConfig resolve(const Flags& f) {
  RunConfig c = default_run_config();
  const auto names = submission_config_names();
  const bool config_is_name = std::find(names.begin(), names.end(), f.config) != names.end();
  if (!f.config.empty() && !config_is_name) c = load_run_config(f.config);
  if (config_is_name) c.model_config = f.config;
  if (!f.manifest.empty()) c.manifest = f.manifest;
  if (!f.dev_manifest.empty()) c.dev_manifest = f.dev_manifest;
  if (!f.test_manifest.empty()) c.test_manifest = f.test_manifest;
  if (!f.out.empty()) c.out = f.out;
  if (!f.task.empty()) c.task = f.task;
  if (!f.features.empty()) c.features = f.features;
  if (!f.model_config.empty()) c.model_config = f.model_config;
  if (f.k) c.k = *f.k;
  if (f.seed) c.seed = *f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.no_grid) c.grid_search = false;
  c.validate();
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::kInvalidConfig, std::string(flag) + " is required");
}

FitOptions fit_options(const RunConfig& c) { return {c.seed, c.k, c.jobs}; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void print_metrics(const EvalReport& r) {
  std::cout << "n\t" << r.n << "\n";
  if (r.classification) {
    const auto& m = *r.classification;
    std::cout << "macro_precision\t" << fmt(m.macro_precision) << "\n"
              << "macro_recall\t" << fmt(m.macro_recall) << "\n"
              << "macro_f1\t" << fmt(m.macro_f1) << "\n"
              << "macro_f1_per_class_avg\t" << fmt(m.macro_f1_per_class_avg) << "\n"
              << "confusion (rows true HC/MCI/AD, cols predicted)\n";
    for (const auto& row : m.confusion) std::cout << "\t" << row[0] << "\t" << row[1] << "\t" << row[2] << "\n";
    for (const auto& z : m.zero_division) std::cerr << "warning\tzero division in " << z << "\n";
  }
  if (r.rmse) std::cout << "rmse\t" << fmt(*r.rmse) << "\n";
}

// Training data for train/cv: the manifest, plus dev rows for train+dev configs.
CohortManifest training_manifest(const RunConfig& c, const PipelineConfig& p) {
  require(c.manifest, "--manifest");
  CohortManifest m = load_manifest(c.manifest);
  if (p.train_split == TrainSplit::kTrainDev && !c.dev_manifest.empty()) {
    m = merge_manifests(m, load_manifest(c.dev_manifest));
  }
  return m;
}

Dataset training_data(const RunConfig& c, const PipelineConfig& p) {
  const auto manifest = training_manifest(c, p);
  auto features = extract_features(manifest, p.features, feature_options(c));
  warn(features.warnings);
  std::vector<std::string> dropped;
  Dataset d = join_labels(features.table, manifest, p.target, &dropped);
  for (const auto& id : dropped) std::cerr << "warning\tparticipant " << id << ": no label; row dropped\n";
  return d;
}

Json selection_json(const std::vector<MemberSelection>& members) {
  Json out = Json::array();
  for (const auto& m : members) {
    Json entry{{"learner", learner_family_name(m.family)}, {"hyperparameters", m.hyperparameters}};
    if (m.grid) {
      Json cells = Json::array();
      for (const auto& cell : m.grid->cells) {
        Json row{{"params", cell.params}, {"fold_scores", cell.fold_scores}};
        if (cell.error) {
          row["error"] = *cell.error;
        } else {
          row["mean"] = cell.mean;
        }
        cells.push_back(std::move(row));
      }
      entry["grid"] = cells;
      entry["best_cell"] = m.grid->best_index;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void print_grids(const std::vector<MemberSelection>& members) {
  for (const auto& m : members) {
    if (!m.grid) continue;
    std::cout << "grid\t" << learner_family_name(m.family) << "\n" << format_grid_table(*m.grid);
  }
}

// ---------------------------------------------------------------------------

int cmd_validate(const Flags& f, const std::string& mode, bool skip_files, bool require_embeddings) {
  const RunConfig c = resolve(f);
  require(c.manifest, "--manifest");
  const auto manifest = load_manifest(c.manifest);
  CohortMode m;
  if (mode == "classification") {
    m = CohortMode::kClassification;
  } else if (mode == "regression") {
    m = CohortMode::kRegression;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "--mode must be classification or regression");
  }
  const auto v = validate_cohort(manifest, m, {!skip_files, require_embeddings});
  std::size_t blocking = 0;
  for (const auto& finding : v.findings) {
    blocking += finding.blocking;
    std::cout << "finding\t" << finding.participant_id << "\t" << finding_kind_name(finding.kind) << "\t"
              << (finding.blocking ? "blocking" : "info") << "\t" << finding.message << "\n";
  }
  std::cout << "participants\t" << v.participant_count << "\n"
            << "retained\t" << v.retained_count << "\n"
            << "blocking\t" << blocking << "\n";
  if (v.has_blocking()) throw ValidationFailed{};
  return 0;
}

int cmd_features(const Flags& f) {
  const RunConfig c = resolve(f);
  require(c.manifest, "--manifest");
  require(c.out, "--out");
  const auto manifest = load_manifest(c.manifest);
  const std::optional<Task> task = c.task == "all" ? std::nullopt : parse_task(c.task);
  FeatureExtraction x;
  if (c.features == "embedding_ctd") {
    x = extract_embedding_table(manifest, feature_options(c));
  } else {
    x = extract_linguistic_table(manifest, feature_options(c), task);
  }
  warn(x.warnings);
  save_feature_table(x.table, c.out);
  std::cout << "rows\t" << x.table.rows.size() << "\ncolumns\t" << x.table.columns.size() << "\n";
  return 0;
}

int cmd_pool(const Flags& f) {
  const RunConfig c = resolve(f);
  require(c.manifest, "--manifest");
  require(c.out, "--out");
  const auto x = extract_embedding_table(load_manifest(c.manifest), feature_options(c));
  warn(x.warnings);
  save_feature_table(x.table, c.out);
  std::cout << "rows\t" << x.table.rows.size() << "\ncolumns\t" << x.table.columns.size() << "\n";
  return 0;
}

int cmd_train(const Flags& f) {
  const RunConfig c = resolve(f);
  require(c.out, "--out");
  const PipelineConfig p = resolve_pipeline_config(c);
  const Dataset d = training_data(c, p);
  const auto trained = train_pipeline(p, d, fit_options(c));
  print_grids(trained.members);
  const fs::path out(c.out);
  dump(out / "model.bin", save_ensemble(trained.ensemble, p));
  const Json report{{"config", to_json(p)},
                    {"config_fingerprint", config_fingerprint(p)},
                    {"seed", c.seed},
                    {"training_rows", d.size()},
                    {"dataset_fingerprint", d.fingerprint()},
                    {"members", selection_json(trained.members)}};
  dump(out / "train_report.json", report.dump(2) + "\n");
  std::cout << "model\t" << (out / "model.bin").string() << "\n";
  return 0;
}

int cmd_cv(const Flags& f) {
  const RunConfig c = resolve(f);
  const PipelineConfig p = resolve_pipeline_config(c);
  const Dataset d = training_data(c, p);
  const auto cv = cross_validate(p, d, fit_options(c));
  warn(cv.folds.warnings);
  print_grids(cv.members);
  const auto objective = objective_name(objective_for(p.target));
  for (std::size_t i = 0; i < cv.report.per_fold.size(); ++i) {
    std::cout << "fold\t" << i << "\t" << objective << "\t" << fmt(cv.report.per_fold[i]) << "\n";
  }
  double mean = 0.0;
  for (double s : cv.report.per_fold) mean += s;
  mean /= static_cast<double>(cv.report.per_fold.size());
  std::cout << "mean\t" << objective << "\t" << fmt(mean) << "\n";
  std::cout << "pooled out-of-fold\n";
  print_metrics(cv.report);
  if (!c.out.empty()) {
    Json report = to_json(cv.report);
    report["members"] = selection_json(cv.members);
    dump(c.out, report.dump(2) + "\n");
  }
  return 0;
}

int cmd_predict(const Flags& f, const std::string& model_path) {
  const RunConfig c = resolve(f);
  require(c.manifest, "--manifest");
  require(c.out, "--out");
  require(model_path, "--model");
  const auto loaded = load_ensemble(slurp(model_path));
  const auto manifest = load_manifest(c.manifest);
  RunConfig rc = c;
  if (loaded.ensemble.feature_names().size() != kParticipantFeatureCount &&
      loaded.config.features == FeatureSource::kEmbeddingCtd) {
    rc.embedding_dim = loaded.ensemble.feature_names().size();
  }
  auto x = extract_features(manifest, loaded.config.features, feature_options(rc));
  warn(x.warnings);
  FeatureMatrix m(static_cast<Eigen::Index>(x.table.rows.size()), static_cast<Eigen::Index>(x.table.columns.size()));
  for (std::size_t i = 0; i < x.table.rows.size(); ++i) {
    for (std::size_t j = 0; j < x.table.columns.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x.table.rows[i][j];
    }
  }
  const auto pred = loaded.ensemble.predict(m, x.table.columns, c.jobs);
  dump(c.out, format_predictions(x.table.row_ids, pred));
  std::cout << "predictions\t" << x.table.rows.size() << "\n";
  return 0;
}

int cmd_evaluate(const Flags& f, const std::string& predictions, const std::string& mode) {
  const RunConfig c = resolve(f);
  require(c.manifest, "--manifest");
  require(predictions, "--predictions");
  TargetKind kind;
  if (mode == "classification") {
    kind = TargetKind::kClassification;
  } else if (mode == "regression") {
    kind = TargetKind::kRegression;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "--mode must be classification or regression");
  }
  const auto report = evaluate_predictions(parse_predictions(slurp(predictions)), load_manifest(c.manifest), kind);
  print_metrics(report);
  if (!c.out.empty()) dump(c.out, serialize_report(report));
  return 0;
}

int cmd_run(const Flags& f) {
  const RunConfig c = resolve(f);
  require(c.manifest, "--manifest");
  require(c.test_manifest, "--test-manifest");
  require(c.out, "--out");
  const PipelineConfig p = resolve_pipeline_config(c);
  std::optional<CohortManifest> dev;
  if (!c.dev_manifest.empty()) dev = load_manifest(c.dev_manifest);
  const auto run = run_pipeline(p, load_manifest(c.manifest), dev, load_manifest(c.test_manifest), feature_options(c),
                                fit_options(c), fs::path(c.out));
  warn(run.warnings);
  print_metrics(run.report);
  return 0;
}

int cmd_synth(const Flags& f, const std::string& spec_path, std::optional<double> separation, bool regression,
              std::optional<double> noise, const std::string& coefficients_path) {
  const RunConfig c = resolve(f);
  require(c.out, "--out");
  CohortSpec spec;
  if (!spec_path.empty()) {
    try {
      spec = cohort_spec_from_json(Json::parse(slurp(spec_path)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, spec_path + ": " + e.what());
    }
  }
  if (separation) spec.separation = *separation;
  if (f.seed) spec.seed = *f.seed;
  spec.validate();
  if (!regression) {
    const auto cohort = gen_cohort(spec, c.out, c.jobs);
    std::cout << "participants\t" << cohort.all.participant_ids().size() << "\n";
    return 0;
  }
  RegressionSignal signal = default_regression_signal();
  if (noise) signal.noise_sigma = *noise;
  if (!coefficients_path.empty()) {
    try {
      const Json j = Json::parse(slurp(coefficients_path));
      const auto names = participant_feature_names();
      std::fill(signal.coefficients.begin(), signal.coefficients.end(), 0.0);
      for (const auto& [key, value] : j.at("coefficients").items()) {
        const auto it = std::find(names.begin(), names.end(), key);
        if (it == names.end()) throw Error(ErrorCode::kInvalidConfig, "unknown feature '" + key + "'");
        signal.coefficients[static_cast<std::size_t>(it - names.begin())] = value.get<double>();
      }
      signal.intercept = j.value("intercept", signal.intercept);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, coefficients_path + ": " + e.what());
    }
  }
  const auto cohort = gen_regression_signal(spec, signal, c.out, c.jobs);
  std::cout << "participants\t" << cohort.cohort.all.participant_ids().size() << "\n"
            << "with_mmse\t" << cohort.ground_truth.at("participants").size() << "\n";
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoFailure:
    case ErrorCode::kDivergedTraining:
      return kExitRuntime;
    default:
      return kExitValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech and language cognitive-marker toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* validate = app.add_subcommand("validate", "check a manifest and its files");
  add_common(validate, f);
  std::string mode = "classification";
  bool skip_files = false;
  bool require_embeddings = false;
  validate->add_option("--manifest", f.manifest);
  validate->add_option("--mode", mode, "classification or regression");
  validate->add_flag("--skip-files", skip_files, "do not stat transcript/embedding files");
  validate->add_flag("--require-embeddings", require_embeddings);

  auto* features = app.add_subcommand("features", "write the linguistic feature table");
  add_common(features, f);
  features->add_option("--manifest", f.manifest);
  features->add_option("--out", f.out);
  features->add_option("--task", f.task, "CTD, SF, PF or all");
  features->add_option("--features", f.features, "linguistic_42 or embedding_ctd");

  auto* pool = app.add_subcommand("pool", "write mean-pooled CTD embeddings");
  add_common(pool, f);
  pool->add_option("--manifest", f.manifest);
  pool->add_option("--out", f.out);

  auto* train = app.add_subcommand("train", "fit a configuration and write model.bin");
  auto* cv = app.add_subcommand("cv", "cross-validate a configuration");
  auto* run = app.add_subcommand("run", "train, predict a test manifest and score it");
  for (auto* sub : {train, cv, run}) {
    add_common(sub, f);
    sub->add_option("--manifest", f.manifest, "training manifest");
    sub->add_option("--dev-manifest", f.dev_manifest, "dev manifest, merged for train+dev configs");
    sub->add_option("--model-config", f.model_config, "cls1..cls3, reg1..reg3 or a JSON file");
    sub->add_option("--features", f.features, "override the config's feature source");
    sub->add_option("--k", f.k, "folds")->check(CLI::Range(2, 1000));
    sub->add_option("--out", f.out);
    sub->add_flag("--no-grid", f.no_grid, "use member hyperparameters as given");
  }
  run->add_option("--test-manifest", f.test_manifest);

  auto* predict = app.add_subcommand("predict", "apply a model to a manifest");
  add_common(predict, f);
  std::string model_path;
  predict->add_option("--model", model_path);
  predict->add_option("--manifest", f.manifest);
  predict->add_option("--out", f.out);

  auto* evaluate = app.add_subcommand("evaluate", "score a predictions file against a manifest");
  add_common(evaluate, f);
  std::string predictions_path;
  std::string eval_mode = "classification";
  evaluate->add_option("--manifest", f.manifest);
  evaluate->add_option("--predictions", predictions_path);
  evaluate->add_option("--mode", eval_mode, "classification or regression");
  evaluate->add_option("--out", f.out, "report file");

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(synth, f);
  std::string spec_path;
  std::optional<double> separation;
  bool regression = false;
  std::optional<double> noise;
  std::string coefficients_path;
  synth->add_option("--out", f.out);
  synth->add_option("--spec", spec_path, "cohort spec JSON");
  synth->add_option("--separation", separation);
  synth->add_flag("--regression-signal", regression, "replace MMSE by a linear function of the features");
  synth->add_option("--noise", noise, "noise sigma for --regression-signal");
  synth->add_option("--coefficients", coefficients_path, "JSON with coefficients (by column) and intercept");

  auto* config = app.add_subcommand("config", "print or check run configs");
  bool dump_config = false;
  std::string check_path;
  config->add_flag("--dump", dump_config, "print the default run config");
  config->add_option("--check", check_path, "validate a run config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(f, mode, skip_files, require_embeddings);
    if (*features) return cmd_features(f);
    if (*pool) return cmd_pool(f);
    if (*train) return cmd_train(f);
    if (*cv) return cmd_cv(f);
    if (*run) return cmd_run(f);
    if (*predict) return cmd_predict(f, model_path);
    if (*evaluate) return cmd_evaluate(f, predictions_path, eval_mode);
    if (*synth) return cmd_synth(f, spec_path, separation, regression, noise, coefficients_path);
    if (*config) {
      if (!check_path.empty()) {
        load_run_config(check_path);
        std::cout << "ok\n";
        return 0;
      }
      std::cout << to_json(default_run_config()).dump(2) << "\n";
      return 0;
    }
  } catch (const ValidationFailed&) {
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error\t" << error_code_name(e.code()) << "\t" << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error\tRuntime\t" << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
