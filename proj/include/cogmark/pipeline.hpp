#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cogmark/embedding.hpp"
#include "cogmark/ensemble.hpp"
#include "cogmark/eval.hpp"
#include "cogmark/features.hpp"
#include "cogmark/transcript.hpp"

namespace cogmark {

struct FeatureOptions {
  FeatureRules rules;
  TranscriptOptions transcript;
  MissingTaskPolicy missing_task_policy = MissingTaskPolicy::kZeroFill;
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  unsigned jobs = 1;
};

struct FeatureExtraction {
  FeatureTable table;
  std::vector<std::string> warnings;
};

// 42 columns for all tasks, or the 14 columns of `only_task`. Rows follow
// manifest participant order; participants with nothing usable are dropped
// with a warning.
FeatureExtraction extract_linguistic_table(const CohortManifest& manifest, const FeatureOptions& options,
                                           std::optional<Task> only_task = std::nullopt);
// Mean-pooled CTD embeddings, columns emb_0000..
FeatureExtraction extract_embedding_table(const CohortManifest& manifest, const FeatureOptions& options);
FeatureExtraction extract_features(const CohortManifest& manifest, FeatureSource source,
                                   const FeatureOptions& options);

// Attaches diagnosis or MMSE from the manifest; rows without one are dropped
// and their ids appended to `dropped`.
Dataset join_labels(const FeatureTable& table, const CohortManifest& manifest, TargetKind kind,
                    std::vector<std::string>* dropped = nullptr);

struct FitOptions {
  std::uint64_t seed = 0;
  int k = 5;
  unsigned jobs = 1;
};

struct MemberSelection {
  LearnerFamily family;
  Json hyperparameters;
  std::optional<GridResult> grid;
};

// Member hyperparameters after seeding and, when the config asks for it, grid
// search over `folds`.
std::vector<MemberSelection> select_members(const PipelineConfig& config, const Dataset& d, const FoldPlan& folds,
                                            const FitOptions& options);

VotingEnsemble fit_members(const PipelineConfig& config, const std::vector<MemberSelection>& members,
                           const Dataset& d, unsigned jobs = 1);

struct TrainedPipeline {
  VotingEnsemble ensemble;
  std::vector<MemberSelection> members;
};

TrainedPipeline train_pipeline(const PipelineConfig& config, const Dataset& d, const FitOptions& options);

struct CrossValidation {
  EvalReport report;  // per_fold = objective per fold; metrics over pooled out-of-fold predictions
  std::vector<MemberSelection> members;
  FoldPlan folds;
};

// Selects hyperparameters once on the full dataset (no nesting), then scores
// the ensemble on each fold.
CrossValidation cross_validate(const PipelineConfig& config, const Dataset& d, const FitOptions& options);

std::uint32_t config_fingerprint(const PipelineConfig& config);

// participant_id,prediction with class names or reals.
std::string format_predictions(const std::vector<std::string>& ids, const EnsemblePrediction& prediction);

struct PredictionFile {
  std::vector<std::string> ids;
  std::vector<std::string> values;
};

PredictionFile parse_predictions(std::string_view text);

// Scores a predictions file against manifest ground truth. Participants
// without a label are skipped; predictions for unknown ids are errors.
EvalReport evaluate_predictions(const PredictionFile& predictions, const CohortManifest& manifest, TargetKind kind);

EvalReport score_predictions(const Dataset& truth, const EnsemblePrediction& prediction);

struct PipelineRun {
  EvalReport report;
  std::string predictions;  // file contents
  std::string model;        // ensemble container bytes
  std::vector<std::string> warnings;
};

// Features, fit (with grid search when configured), predict and score. When
// `out_dir` is given writes predictions.csv, report.json and model.bin there.
PipelineRun run_pipeline(const PipelineConfig& config, const CohortManifest& train,
                         const std::optional<CohortManifest>& dev, const CohortManifest& test,
                         const FeatureOptions& features, const FitOptions& fit,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace cogmark
