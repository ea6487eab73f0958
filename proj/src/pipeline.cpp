#include "cogmark/pipeline.hpp"

#include <cstdio>
#include <map>
#include <set>

#include "cogmark/error.hpp"
#include "cogmark/parallel.hpp"
#include "cogmark/rng.hpp"
#include "text_util.hpp"

namespace cogmark {

namespace {

constexpr std::uint64_t kFoldStream = 0xF01D;
constexpr std::uint64_t kMemberStream = 0x3E3B;

FeatureMatrix table_matrix(const FeatureTable& table) {
  FeatureMatrix x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][j];
    }
  }
  return x;
}

}  // namespace

FeatureExtraction extract_linguistic_table(const CohortManifest& manifest, const FeatureOptions& options,
                                           std::optional<Task> only_task) {
  FeatureExtraction out;
  std::vector<const ManifestRow*> rows;
  for (const auto& row : manifest.rows) {
    if (only_task && row.task != *only_task) continue;
    if (row.duration_seconds <= 0.0) {
      out.warnings.push_back("participant " + row.participant_id + ": task " + std::string(task_name(row.task)) +
                             " has no speech (duration 0); treated as missing");
      continue;
    }
    rows.push_back(&row);
  }
  std::vector<std::optional<TaskFeatureVector>> vectors(rows.size());
  parallel_for(rows.size(), options.jobs, [&](std::size_t i) {
    const ManifestRow& row = *rows[i];
    const auto transcript = load_transcript(manifest.resolve(row.transcript_path), row.participant_id, row.task,
                                            row.duration_seconds, options.transcript);
    vectors[i] = compute_features(row.task, extract_counts(transcript, options.rules), row.duration_seconds);
  });

  std::map<std::string, std::map<Task, TaskFeatureVector>> by_participant;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    by_participant[rows[i]->participant_id].emplace(rows[i]->task, *vectors[i]);
  }

  if (only_task) {
    out.table.columns = task_feature_columns(*only_task);
  } else {
    out.table.columns = participant_feature_names();
  }
  for (const auto& id : manifest.participant_ids()) {
    const auto found = by_participant.find(id);
    if (only_task) {
      if (found == by_participant.end()) {
        out.warnings.push_back("participant " + id + ": no usable " + std::string(task_name(*only_task)) +
                               " transcript; row dropped");
        continue;
      }
      const auto& values = found->second.at(*only_task).values();
      out.table.row_ids.push_back(id);
      out.table.rows.emplace_back(values.begin(), values.end());
      continue;
    }
    if (found == by_participant.end()) {
      if (options.missing_task_policy == MissingTaskPolicy::kReject) {
        throw Error(ErrorCode::kAllTasksMissing, "participant " + id + " has no usable task");
      }
      out.warnings.push_back("participant " + id + ": no usable task; row dropped");
      continue;
    }
    auto assembled = assemble_participant_vector(id, found->second, options.missing_task_policy);
    out.warnings.insert(out.warnings.end(), assembled.warnings.begin(), assembled.warnings.end());
    out.table.row_ids.push_back(id);
    out.table.rows.emplace_back(assembled.vector.values.begin(), assembled.vector.values.end());
  }
  return out;
}

FeatureExtraction extract_embedding_table(const CohortManifest& manifest, const FeatureOptions& options) {
  FeatureExtraction out;
  const auto join = join_embeddings(manifest, Task::kCtd, options.embedding_dim, options.jobs);
  for (const auto& f : join.findings) {
    if (f.blocking) throw Error(ErrorCode::kMissingEmbeddingFile, f.participant_id + ": " + f.message);
    out.warnings.push_back("participant " + f.participant_id + ": " + f.message + "; row dropped");
  }
  char name[32];
  for (std::size_t j = 0; j < options.embedding_dim; ++j) {
    std::snprintf(name, sizeof name, "emb_%04zu", j);
    out.table.columns.emplace_back(name);
  }
  for (const auto& e : join.embeddings) {
    out.table.row_ids.push_back(e.participant_id);
    out.table.rows.emplace_back(e.values.data(), e.values.data() + e.values.size());
  }
  return out;
}

FeatureExtraction extract_features(const CohortManifest& manifest, FeatureSource source,
                                   const FeatureOptions& options) {
  return source == FeatureSource::kLinguistic42 ? extract_linguistic_table(manifest, options)
                                                : extract_embedding_table(manifest, options);
}

Dataset join_labels(const FeatureTable& table, const CohortManifest& manifest, TargetKind kind,
                    std::vector<std::string>* dropped) {
  std::map<std::string, const ManifestRow*> truth;
  for (const auto& row : manifest.rows) {
    const bool has = kind == TargetKind::kClassification ? row.diagnosis.has_value() : row.mmse.has_value();
    if (has) truth.emplace(row.participant_id, &row);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < table.row_ids.size(); ++i) {
    if (truth.count(table.row_ids[i])) {
      keep.push_back(i);
    } else if (dropped) {
      dropped->push_back(table.row_ids[i]);
    }
  }
  FeatureMatrix x(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(table.columns.size()));
  if (keep.empty()) {
    Dataset empty;
    empty.kind = kind;
    empty.x = std::move(x);
    empty.columns = table.columns;
    return empty;
  }
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> targets;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto& values = table.rows[keep[r]];
    for (std::size_t j = 0; j < values.size(); ++j) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = values[j];
    }
    const auto& id = table.row_ids[keep[r]];
    ids.push_back(id);
    const ManifestRow& row = *truth.at(id);
    if (kind == TargetKind::kClassification) {
      labels.push_back(static_cast<int>(*row.diagnosis));
    } else {
      targets.push_back(static_cast<double>(*row.mmse));
    }
  }
  return kind == TargetKind::kClassification ? make_classification(std::move(x), std::move(labels), table.columns, ids)
                                             : make_regression(std::move(x), std::move(targets), table.columns, ids);
}

// ---------------------------------------------------------------------------
// Fitting

std::vector<MemberSelection> select_members(const PipelineConfig& config, const Dataset& d, const FoldPlan& folds,
                                            const FitOptions& options) {
  if (d.kind != config.target) {
    throw Error(ErrorCode::kMixedTaskMembers, "dataset target does not match config '" + config.name + "'");
  }
  std::vector<MemberSelection> out;
  for (std::size_t m = 0; m < config.members.size(); ++m) {
    const auto& spec = config.members[m];
    MemberSelection sel{spec.family, spec.hyperparameters, std::nullopt};
    sel.hyperparameters["seed"] = derive_seed(options.seed, kMemberStream + m);
    if (config.grid_search && !spec.grid.empty()) {
      sel.grid = grid_search(d, spec.family, spec.grid, folds, objective_for(d.kind), sel.hyperparameters,
                             options.jobs);
      sel.hyperparameters = sel.grid->best().params;
    }
    out.push_back(std::move(sel));
  }
  return out;
}

VotingEnsemble fit_members(const PipelineConfig& config, const std::vector<MemberSelection>& members,
                           const Dataset& d, unsigned jobs) {
  std::vector<TrainedModel> models;
  for (const auto& m : members) models.push_back(fit_model(d, m.family, m.hyperparameters, jobs));
  return VotingEnsemble(std::move(models), config.vote, config.weights);
}

namespace {

bool needs_folds(const PipelineConfig& config) {
  if (!config.grid_search) return false;
  for (const auto& m : config.members) {
    if (!m.grid.empty()) return true;
  }
  return false;
}

}  // namespace

TrainedPipeline train_pipeline(const PipelineConfig& config, const Dataset& d, const FitOptions& options) {
  d.validate();
  FoldPlan folds;
  if (needs_folds(config)) folds = make_folds(d, options.k, derive_seed(options.seed, kFoldStream));
  auto members = select_members(config, d, folds, options);
  auto ensemble = fit_members(config, members, d, options.jobs);
  return {std::move(ensemble), std::move(members)};
}

std::uint32_t config_fingerprint(const PipelineConfig& config) {
  const std::string text = to_json(config).dump();
  return crc32_bytes(text.data(), text.size());
}

CrossValidation cross_validate(const PipelineConfig& config, const Dataset& d, const FitOptions& options) {
  d.validate();
  CrossValidation cv;
  cv.folds = make_folds(d, options.k, derive_seed(options.seed, kFoldStream));
  cv.members = select_members(config, d, cv.folds, options);

  const std::size_t n = d.size();
  std::vector<int> oof_labels(n, 0);
  std::vector<double> oof_values(n, 0.0);
  for (std::size_t f = 0; f < cv.folds.folds.size(); ++f) {
    const Dataset train = d.subset(cv.folds.train_indices(f));
    const Dataset test = d.subset(cv.folds.folds[f]);
    const auto ensemble = fit_members(config, cv.members, train, options.jobs);
    const auto pred = ensemble.predict(test.x, {}, options.jobs);
    const auto& idx = cv.folds.folds[f];
    if (d.kind == TargetKind::kClassification) {
      cv.report.per_fold.push_back(macro_metrics(test.labels, pred.labels).macro_f1);
      for (std::size_t i = 0; i < idx.size(); ++i) oof_labels[idx[i]] = pred.labels[i];
    } else {
      cv.report.per_fold.push_back(
          rmse(test.targets, std::span<const double>(pred.values.data(), static_cast<std::size_t>(pred.values.size()))));
      for (std::size_t i = 0; i < idx.size(); ++i) oof_values[idx[i]] = pred.values(static_cast<Eigen::Index>(i));
    }
  }
  cv.report.kind = d.kind;
  cv.report.n = n;
  if (d.kind == TargetKind::kClassification) {
    cv.report.classification = macro_metrics(d.labels, oof_labels);
  } else {
    cv.report.rmse = rmse(d.targets, oof_values);
  }
  cv.report.config_name = config.name;
  cv.report.config_fingerprint = config_fingerprint(config);
  cv.report.seed = options.seed;
  return cv;
}

// ---------------------------------------------------------------------------
// Prediction files

std::string format_predictions(const std::vector<std::string>& ids, const EnsemblePrediction& prediction) {
  std::string out = "participant_id,prediction\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    out += ',';
    if (prediction.kind == TargetKind::kClassification) {
      out += diagnosis_name(static_cast<Diagnosis>(prediction.labels[i]));
    } else {
      out += detail::format_real(prediction.values(static_cast<Eigen::Index>(i)));
    }
    out += '\n';
  }
  return out;
}

PredictionFile parse_predictions(std::string_view text) {
  const auto lines = detail::split_lines(detail::strip_bom(text));
  if (lines.empty() || lines.front() != "participant_id,prediction") {
    throw Error(ErrorCode::kMissingColumn, "predictions header must be participant_id,prediction");
  }
  PredictionFile out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::is_blank(lines[i])) continue;
    const auto fields = detail::split(lines[i], ',');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw Error(ErrorCode::kMalformedLine, "line " + std::to_string(i + 1) + ": expected participant_id,prediction");
    }
    out.ids.emplace_back(fields[0]);
    out.values.emplace_back(fields[1]);
  }
  return out;
}

EvalReport evaluate_predictions(const PredictionFile& predictions, const CohortManifest& manifest, TargetKind kind) {
  std::map<std::string, const ManifestRow*> rows;
  for (const auto& row : manifest.rows) {
    auto& slot = rows[row.participant_id];
    const bool has = kind == TargetKind::kClassification ? row.diagnosis.has_value() : row.mmse.has_value();
    if (!slot || has) slot = &row;
  }
  std::set<std::string> seen;
  std::vector<int> y_true, y_pred;
  std::vector<double> v_true, v_pred;
  for (std::size_t i = 0; i < predictions.ids.size(); ++i) {
    const auto& id = predictions.ids[i];
    const auto found = rows.find(id);
    if (found == rows.end()) throw Error(ErrorCode::kInvalidDataset, "prediction for unknown participant " + id);
    if (!seen.insert(id).second) throw Error(ErrorCode::kInvalidDataset, "duplicate prediction for " + id);
    const ManifestRow& row = *found->second;
    if (kind == TargetKind::kClassification) {
      const auto label = parse_diagnosis(predictions.values[i]);
      if (!label) throw Error(ErrorCode::kUnknownDiagnosisLabel, "prediction '" + predictions.values[i] + "' for " + id);
      if (!row.diagnosis) continue;
      y_true.push_back(static_cast<int>(*row.diagnosis));
      y_pred.push_back(static_cast<int>(*label));
    } else {
      const auto value = detail::parse_real(predictions.values[i]);
      if (!value || !std::isfinite(*value)) {
        throw Error(ErrorCode::kMalformedLine, "prediction '" + predictions.values[i] + "' for " + id);
      }
      if (!row.mmse) continue;
      v_true.push_back(static_cast<double>(*row.mmse));
      v_pred.push_back(*value);
    }
  }
  EvalReport report;
  report.kind = kind;
  if (kind == TargetKind::kClassification) {
    report.n = y_true.size();
    report.classification = macro_metrics(y_true, y_pred);
  } else {
    report.n = v_true.size();
    report.rmse = rmse(v_true, v_pred);
  }
  return report;
}

EvalReport score_predictions(const Dataset& truth, const EnsemblePrediction& prediction) {
  EvalReport report;
  report.kind = truth.kind;
  report.n = truth.size();
  if (truth.kind == TargetKind::kClassification) {
    report.classification = macro_metrics(truth.labels, prediction.labels);
  } else {
    report.rmse = rmse(truth.targets, std::span<const double>(prediction.values.data(),
                                                              static_cast<std::size_t>(prediction.values.size())));
  }
  return report;
}

// ---------------------------------------------------------------------------
// End to end

PipelineRun run_pipeline(const PipelineConfig& config, const CohortManifest& train,
                         const std::optional<CohortManifest>& dev, const CohortManifest& test,
                         const FeatureOptions& features, const FitOptions& fit,
                         const std::optional<std::filesystem::path>& out_dir) {
  PipelineRun run;
  const CohortManifest fit_manifest =
      config.train_split == TrainSplit::kTrainDev && dev ? merge_manifests(train, *dev) : train;

  auto train_features = extract_features(fit_manifest, config.features, features);
  run.warnings = std::move(train_features.warnings);
  std::vector<std::string> dropped;
  const Dataset d = join_labels(train_features.table, fit_manifest, config.target, &dropped);
  for (const auto& id : dropped) run.warnings.push_back("participant " + id + ": no training label; row dropped");
  const auto trained = train_pipeline(config, d, fit);

  auto test_features = extract_features(test, config.features, features);
  for (auto& w : test_features.warnings) run.warnings.push_back("test " + w);
  const auto prediction =
      trained.ensemble.predict(table_matrix(test_features.table), test_features.table.columns, fit.jobs);
  run.predictions = format_predictions(test_features.table.row_ids, prediction);
  run.model = save_ensemble(trained.ensemble, config);

  const Dataset truth = join_labels(test_features.table, test, config.target);
  if (truth.size() > 0) {
    run.report = evaluate_predictions(parse_predictions(run.predictions), test, config.target);
  } else {
    run.report.kind = config.target;
  }
  run.report.config_name = config.name;
  run.report.config_fingerprint = config_fingerprint(config);
  run.report.seed = fit.seed;

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    detail::write_file(*out_dir / "predictions.csv", run.predictions);
    detail::write_file(*out_dir / "report.json", serialize_report(run.report));
    detail::write_file(*out_dir / "model.bin", run.model);
  }
  return run;
}

}  // namespace cogmark
