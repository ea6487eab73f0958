#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cogmark/dataset.hpp"
#include "cogmark/tree.hpp"

namespace cogmark {

using Json = nlohmann::ordered_json;

enum class ModelKind : std::uint8_t {
  kRandomForestClassifier = 1,
  kRandomForestRegressor = 2,
  kAdaBoostClassifier = 3,
  kAdaBoostRegressor = 4,
  kGradientBoostingRegressor = 5,
  kNeuralNetClassifier = 6,
};

// Learner family, independent of classification/regression mode.
enum class LearnerFamily { kRandomForest, kAdaBoost, kGradientBoosting, kNeuralNet };

std::string_view learner_family_name(LearnerFamily family);
std::optional<LearnerFamily> parse_learner_family(std::string_view name);
std::string_view model_kind_name(ModelKind kind);
TargetKind target_kind(ModelKind kind);
LearnerFamily learner_family(ModelKind kind);
// Throws InvalidHyperparameter for a family/mode pair with no learner.
ModelKind model_kind_for(LearnerFamily family, TargetKind target);

struct ForestParams {
  int n_trees = 100;
  std::optional<int> max_depth;
  int min_samples_leaf = 1;
  std::optional<int> features_per_split;  // default floor(sqrt(D))
  std::uint64_t seed = 0;
};

struct AdaBoostParams {
  int n_estimators = 50;
  double learning_rate = 1.0;
  std::optional<int> base_depth;  // default 1 (classification) / 3 (regression)
  std::uint64_t seed = 0;
};

struct GradientBoostingParams {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  std::uint64_t seed = 0;
};

struct NeuralNetParams {
  std::vector<int> hidden_sizes = {64};
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

// JSON objects with the field names above; unknown keys are rejected.
// "max_depth": null means unlimited.
ForestParams forest_params_from_json(const Json& j);
AdaBoostParams adaboost_params_from_json(const Json& j);
GradientBoostingParams gbm_params_from_json(const Json& j);
NeuralNetParams neural_net_params_from_json(const Json& j);
Json to_json(const ForestParams& p);
Json to_json(const AdaBoostParams& p);
Json to_json(const GradientBoostingParams& p);
Json to_json(const NeuralNetParams& p);

struct ForestState {
  std::vector<DecisionTree> trees;
};

struct AdaBoostState {
  std::vector<DecisionTree> stages;
  std::vector<double> stage_weights;
  std::vector<double> fallback;  // class priors (3) or target mean (1); used when stages is empty
  std::vector<int> present_classes;
};

struct GradientBoostingState {
  double initial = 0.0;
  double learning_rate = 0.1;
  std::vector<DecisionTree> stages;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

struct NeuralNetState {
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  std::vector<DenseLayer> layers;  // ReLU between layers, softmax after the last
};

using ModelState = std::variant<ForestState, AdaBoostState, GradientBoostingState, NeuralNetState>;

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::uint32_t dataset_fingerprint = 0;
  std::uint32_t training_rows = 0;
  std::vector<std::string> feature_names;
  bool fallback = false;  // boosting rejected every stage
};

// Class probabilities (N x 3) for classifiers, clamped values (N) for regressors.
struct Prediction {
  TargetKind kind = TargetKind::kClassification;
  Eigen::MatrixXd probabilities;
  Eigen::VectorXd values;

  std::vector<int> labels() const;  // argmax, ties to the lowest class index
};

class TrainedModel {
 public:
  TrainedModel(ModelKind kind, Json hyperparameters, ModelState state, TrainingMetadata metadata);

  ModelKind kind() const { return kind_; }
  TargetKind target() const { return target_kind(kind_); }
  const Json& hyperparameters() const { return hyperparameters_; }
  const ModelState& state() const { return state_; }
  const TrainingMetadata& metadata() const { return metadata_; }

  // Throws SchemaMismatch unless x has the training width (and, when
  // given, the same column names).
  Prediction predict(const FeatureMatrix& x, std::span<const std::string> columns = {}) const;

  // Regressors only: unclamped output of the first `stages` boosting stages.
  Eigen::VectorXd staged_raw_regression(const FeatureMatrix& x, std::size_t stages) const;

 private:
  ModelKind kind_;
  Json hyperparameters_;
  ModelState state_;
  TrainingMetadata metadata_;
};

TrainedModel fit_random_forest(const Dataset& d, const ForestParams& hp, unsigned jobs = 1);
TrainedModel fit_adaboost(const Dataset& d, const AdaBoostParams& hp);
TrainedModel fit_gradient_boosting(const Dataset& d, const GradientBoostingParams& hp);
TrainedModel fit_neural_net(const Dataset& d, const NeuralNetParams& hp);

// Dispatch on family with JSON hyperparameters; the dataset decides the mode.
TrainedModel fit_model(const Dataset& d, LearnerFamily family, const Json& hyperparameters, unsigned jobs = 1);

Prediction predict(const TrainedModel& m, const FeatureMatrix& x, std::span<const std::string> columns = {});

inline constexpr std::uint8_t kModelFormatVersion = 1;

std::string save_model(const TrainedModel& m);
TrainedModel load_model(std::string_view bytes);

// Network internals, exposed for gradient checking.
namespace nn {

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Mean cross-entropy over the batch plus (l2 / 2) * sum of squared weights.
double loss_and_gradients(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                          std::span<const int> labels, double l2, Gradients* grads);

// Row-wise softmax probabilities for already-standardized inputs.
Eigen::MatrixXd forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs);

std::vector<DenseLayer> init_layers(int inputs, std::span<const int> hidden, int outputs, std::uint64_t seed);

}  // namespace nn

}  // namespace cogmark
