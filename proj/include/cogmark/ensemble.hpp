#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogmark/learners.hpp"

namespace cogmark {

enum class VoteKind : std::uint8_t { kHard = 0, kSoft = 1, kRegressorMean = 2 };

std::string_view vote_kind_name(VoteKind kind);

// Combination rules over member outputs. Weights default to uniform and must
// be positive and finite.
Eigen::MatrixXd combine_soft(std::span<const Eigen::MatrixXd> member_probabilities,
                             std::span<const double> weights = {});
std::vector<int> combine_hard(std::span<const Eigen::MatrixXd> member_probabilities,
                              std::span<const double> weights = {});
Eigen::VectorXd combine_regress(std::span<const Eigen::VectorXd> member_values, std::span<const double> weights = {});

// Plurality over `votes`; ties go to the larger soft score among the tied
// classes, then to the lowest class index.
int hard_vote_winner(const std::array<double, 3>& votes, const std::array<double, 3>& soft_scores);

struct EnsemblePrediction {
  TargetKind kind = TargetKind::kClassification;
  Eigen::MatrixXd probabilities;  // soft average (classification)
  std::vector<int> labels;        // per vote kind (classification)
  Eigen::VectorXd values;         // clamped mean (regression)
};

class VotingEnsemble {
 public:
  VotingEnsemble(std::vector<TrainedModel> members, VoteKind vote, std::vector<double> weights = {});

  const std::vector<TrainedModel>& members() const { return members_; }
  VoteKind vote() const { return vote_; }
  const std::vector<double>& weights() const { return weights_; }
  TargetKind target() const { return members_.front().target(); }
  const std::vector<std::string>& feature_names() const { return members_.front().metadata().feature_names; }

  EnsemblePrediction predict(const FeatureMatrix& x, std::span<const std::string> columns = {},
                             unsigned jobs = 1) const;

 private:
  std::vector<TrainedModel> members_;
  VoteKind vote_;
  std::vector<double> weights_;
};

// Direct forms; members are checked for a shared schema and task type.
Eigen::MatrixXd vote_soft(std::span<const TrainedModel> members, const FeatureMatrix& x,
                          std::span<const double> weights = {});
std::vector<int> vote_hard(std::span<const TrainedModel> members, const FeatureMatrix& x,
                           std::span<const double> weights = {});
Eigen::VectorXd vote_regress(std::span<const TrainedModel> members, const FeatureMatrix& x,
                             std::span<const double> weights = {});

// ---------------------------------------------------------------------------
// Declarative pipeline configurations

enum class FeatureSource : std::uint8_t { kLinguistic42 = 0, kEmbeddingCtd = 1 };
enum class TrainSplit : std::uint8_t { kTrain = 0, kTrainDev = 1 };

std::string_view feature_source_name(FeatureSource source);
std::string_view train_split_name(TrainSplit split);

struct MemberSpec {
  LearnerFamily family = LearnerFamily::kRandomForest;
  Json hyperparameters = Json::object();  // merged over learner defaults
  Json grid = Json::object();             // key -> list of values
};

struct PipelineConfig {
  std::string name;
  TargetKind target = TargetKind::kClassification;
  FeatureSource features = FeatureSource::kLinguistic42;
  std::vector<MemberSpec> members;
  VoteKind vote = VoteKind::kSoft;
  std::vector<double> weights;  // empty = uniform
  TrainSplit train_split = TrainSplit::kTrainDev;
  bool grid_search = true;
};

// Named configurations cls1..cls3 and reg1..reg3. Throws UnknownConfigName.
PipelineConfig build_submission_config(std::string_view name);
std::vector<std::string> submission_config_names();

// Default search spaces per learner family.
Json default_grid(LearnerFamily family);

Json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const Json& j);

// Container: magic, version, config JSON, member weights, member model files,
// trailing CRC32.
std::string save_ensemble(const VotingEnsemble& ensemble, const PipelineConfig& config);

struct LoadedEnsemble {
  VotingEnsemble ensemble;
  PipelineConfig config;
};

LoadedEnsemble load_ensemble(std::string_view bytes);

}  // namespace cogmark
