#include "cogmark/learners.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cogmark/error.hpp"
#include "cogmark/types.hpp"

namespace cogmark {

std::string_view learner_family_name(LearnerFamily family) {
  switch (family) {
    case LearnerFamily::kRandomForest: return "random_forest";
    case LearnerFamily::kAdaBoost: return "adaboost";
    case LearnerFamily::kGradientBoosting: return "gradient_boosting";
    case LearnerFamily::kNeuralNet: return "dnn";
  }
  return "?";
}

std::optional<LearnerFamily> parse_learner_family(std::string_view name) {
  for (auto f : {LearnerFamily::kRandomForest, LearnerFamily::kAdaBoost, LearnerFamily::kGradientBoosting,
                 LearnerFamily::kNeuralNet}) {
    if (learner_family_name(f) == name) return f;
  }
  return std::nullopt;
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRandomForestClassifier: return "random_forest_classifier";
    case ModelKind::kRandomForestRegressor: return "random_forest_regressor";
    case ModelKind::kAdaBoostClassifier: return "adaboost_classifier";
    case ModelKind::kAdaBoostRegressor: return "adaboost_regressor";
    case ModelKind::kGradientBoostingRegressor: return "gradient_boosting_regressor";
    case ModelKind::kNeuralNetClassifier: return "dnn_classifier";
  }
  return "?";
}

TargetKind target_kind(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRandomForestRegressor:
    case ModelKind::kAdaBoostRegressor:
    case ModelKind::kGradientBoostingRegressor:
      return TargetKind::kRegression;
    default:
      return TargetKind::kClassification;
  }
}

LearnerFamily learner_family(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRandomForestClassifier:
    case ModelKind::kRandomForestRegressor: return LearnerFamily::kRandomForest;
    case ModelKind::kAdaBoostClassifier:
    case ModelKind::kAdaBoostRegressor: return LearnerFamily::kAdaBoost;
    case ModelKind::kGradientBoostingRegressor: return LearnerFamily::kGradientBoosting;
    case ModelKind::kNeuralNetClassifier: return LearnerFamily::kNeuralNet;
  }
  return LearnerFamily::kRandomForest;
}

ModelKind model_kind_for(LearnerFamily family, TargetKind target) {
  const bool cls = target == TargetKind::kClassification;
  switch (family) {
    case LearnerFamily::kRandomForest:
      return cls ? ModelKind::kRandomForestClassifier : ModelKind::kRandomForestRegressor;
    case LearnerFamily::kAdaBoost:
      return cls ? ModelKind::kAdaBoostClassifier : ModelKind::kAdaBoostRegressor;
    case LearnerFamily::kGradientBoosting:
      if (cls) throw Error(ErrorCode::kInvalidHyperparameter, "gradient boosting is regression-only");
      return ModelKind::kGradientBoostingRegressor;
    case LearnerFamily::kNeuralNet:
      if (!cls) throw Error(ErrorCode::kInvalidHyperparameter, "the network learner is classification-only");
      return ModelKind::kNeuralNetClassifier;
  }
  throw Error(ErrorCode::kInvalidHyperparameter, "unknown learner family");
}

// ---------------------------------------------------------------------------
// Hyperparameter JSON

namespace {

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, std::string_view what) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidHyperparameter, std::string(what) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::kInvalidHyperparameter, std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

int get_int(const Json& j, const char* key, int fallback, int min_value) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw Error(ErrorCode::kInvalidHyperparameter, std::string(key) + " must be an integer");
  const auto x = v.get<long long>();
  if (x < min_value || x > 1'000'000'000) {
    throw Error(ErrorCode::kInvalidHyperparameter, std::string(key) + " out of range");
  }
  return static_cast<int>(x);
}

std::optional<int> get_opt_int(const Json& j, const char* key, std::optional<int> fallback, int min_value) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_null()) return std::nullopt;
  return get_int(j, key, 0, min_value);
}

double get_positive(const Json& j, const char* key, double fallback, bool allow_zero = false) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw Error(ErrorCode::kInvalidHyperparameter, std::string(key) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < 0.0 || (!allow_zero && x == 0.0)) {
    throw Error(ErrorCode::kInvalidHyperparameter, std::string(key) + " must be positive");
  }
  return x;
}

std::uint64_t get_seed(const Json& j, std::uint64_t fallback) {
  if (!j.contains("seed")) return fallback;
  const auto& v = j.at("seed");
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw Error(ErrorCode::kInvalidHyperparameter, "seed must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

Json opt(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

ForestParams forest_params_from_json(const Json& j) {
  reject_unknown(j, {"n_trees", "max_depth", "min_samples_leaf", "features_per_split", "seed"}, "random_forest");
  ForestParams p;
  p.n_trees = get_int(j, "n_trees", p.n_trees, 1);
  p.max_depth = get_opt_int(j, "max_depth", p.max_depth, 1);
  p.min_samples_leaf = get_int(j, "min_samples_leaf", p.min_samples_leaf, 1);
  p.features_per_split = get_opt_int(j, "features_per_split", p.features_per_split, 1);
  p.seed = get_seed(j, p.seed);
  return p;
}

AdaBoostParams adaboost_params_from_json(const Json& j) {
  reject_unknown(j, {"n_estimators", "learning_rate", "base_depth", "seed"}, "adaboost");
  AdaBoostParams p;
  p.n_estimators = get_int(j, "n_estimators", p.n_estimators, 0);
  p.learning_rate = get_positive(j, "learning_rate", p.learning_rate);
  p.base_depth = get_opt_int(j, "base_depth", p.base_depth, 1);
  p.seed = get_seed(j, p.seed);
  return p;
}

GradientBoostingParams gbm_params_from_json(const Json& j) {
  reject_unknown(j, {"n_estimators", "learning_rate", "max_depth", "seed"}, "gradient_boosting");
  GradientBoostingParams p;
  p.n_estimators = get_int(j, "n_estimators", p.n_estimators, 0);
  p.learning_rate = get_positive(j, "learning_rate", p.learning_rate);
  p.max_depth = get_int(j, "max_depth", p.max_depth, 1);
  p.seed = get_seed(j, p.seed);
  return p;
}

NeuralNetParams neural_net_params_from_json(const Json& j) {
  reject_unknown(j, {"hidden_sizes", "epochs", "batch_size", "learning_rate", "l2", "seed"}, "dnn");
  NeuralNetParams p;
  if (j.contains("hidden_sizes")) {
    const auto& h = j.at("hidden_sizes");
    if (!h.is_array()) throw Error(ErrorCode::kInvalidHyperparameter, "hidden_sizes must be an array");
    p.hidden_sizes.clear();
    for (const auto& v : h) {
      if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 100000) {
        throw Error(ErrorCode::kInvalidHyperparameter, "hidden_sizes entries must be positive integers");
      }
      p.hidden_sizes.push_back(v.get<int>());
    }
  }
  p.epochs = get_int(j, "epochs", p.epochs, 0);
  p.batch_size = get_int(j, "batch_size", p.batch_size, 1);
  p.learning_rate = get_positive(j, "learning_rate", p.learning_rate);
  p.l2 = get_positive(j, "l2", p.l2, true);
  p.seed = get_seed(j, p.seed);
  return p;
}

Json to_json(const ForestParams& p) {
  return Json{{"n_trees", p.n_trees},
              {"max_depth", opt(p.max_depth)},
              {"min_samples_leaf", p.min_samples_leaf},
              {"features_per_split", opt(p.features_per_split)},
              {"seed", p.seed}};
}

Json to_json(const AdaBoostParams& p) {
  return Json{{"n_estimators", p.n_estimators},
              {"learning_rate", p.learning_rate},
              {"base_depth", opt(p.base_depth)},
              {"seed", p.seed}};
}

Json to_json(const GradientBoostingParams& p) {
  return Json{{"n_estimators", p.n_estimators},
              {"learning_rate", p.learning_rate},
              {"max_depth", p.max_depth},
              {"seed", p.seed}};
}

Json to_json(const NeuralNetParams& p) {
  return Json{{"hidden_sizes", p.hidden_sizes}, {"epochs", p.epochs},   {"batch_size", p.batch_size},
              {"learning_rate", p.learning_rate}, {"l2", p.l2}, {"seed", p.seed}};
}

// ---------------------------------------------------------------------------
// Prediction

std::vector<int> Prediction::labels() const {
  std::vector<int> out(static_cast<std::size_t>(probabilities.rows()));
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    int best = 0;
    for (int k = 1; k < probabilities.cols(); ++k) {
      if (probabilities(i, k) > probabilities(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

TrainedModel::TrainedModel(ModelKind kind, Json hyperparameters, ModelState state, TrainingMetadata metadata)
    : kind_(kind),
      hyperparameters_(std::move(hyperparameters)),
      state_(std::move(state)),
      metadata_(std::move(metadata)) {}

namespace {

double clamp_mmse(double v) { return std::clamp(v, kMmseMin, kMmseMax); }

Eigen::MatrixXd forest_proba(const ForestState& s, const FeatureMatrix& x) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), kNumClasses);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (const auto& tree : s.trees) {
      const auto& leaf = tree.leaf_value(x.row(i));
      for (int k = 0; k < kNumClasses; ++k) out(i, k) += leaf[k];
    }
  }
  out /= static_cast<double>(s.trees.size());
  return out;
}

Eigen::VectorXd forest_values(const ForestState& s, const FeatureMatrix& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (const auto& tree : s.trees) out(i) += tree.predict_value(x.row(i));
  }
  out /= static_cast<double>(s.trees.size());
  return out;
}

// Multi-class exponential-loss (SAMME) decision turned into probabilities.
Eigen::MatrixXd adaboost_proba(const AdaBoostState& s, const FeatureMatrix& x) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), kNumClasses);
  if (s.stages.empty()) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (int k = 0; k < kNumClasses; ++k) out(i, k) = s.fallback[k];
    }
    return out;
  }
  const int present = static_cast<int>(s.present_classes.size());
  double weight_sum = 0.0;
  for (double a : s.stage_weights) weight_sum += a;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::array<double, kNumClasses> decision{};
    for (std::size_t m = 0; m < s.stages.size(); ++m) {
      const auto& leaf = s.stages[m].leaf_value(x.row(i));
      int vote = 0;
      for (int k = 1; k < kNumClasses; ++k) {
        if (leaf[k] > leaf[vote]) vote = k;
      }
      decision[vote] += s.stage_weights[m];
    }
    double max_z = -INFINITY;
    std::array<double, kNumClasses> z{};
    for (int c : s.present_classes) {
      z[c] = decision[c] / weight_sum / static_cast<double>(std::max(1, present - 1));
      max_z = std::max(max_z, z[c]);
    }
    double total = 0.0;
    for (int c : s.present_classes) {
      out(i, c) = std::exp(z[c] - max_z);
      total += out(i, c);
    }
    out.row(i) /= total;
  }
  return out;
}

// Weighted median of stage predictions.
Eigen::VectorXd adaboost_values(const AdaBoostState& s, const FeatureMatrix& x) {
  Eigen::VectorXd out(x.rows());
  if (s.stages.empty()) {
    out.setConstant(s.fallback[0]);
    return out;
  }
  const std::size_t m = s.stages.size();
  double weight_sum = 0.0;
  for (double a : s.stage_weights) weight_sum += a;
  std::vector<std::pair<double, double>> preds(m);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < m; ++k) preds[k] = {s.stages[k].predict_value(x.row(i)), s.stage_weights[k]};
    std::stable_sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double cum = 0.0;
    double chosen = preds.back().first;
    for (const auto& [value, w] : preds) {
      cum += w;
      if (cum >= 0.5 * weight_sum) {
        chosen = value;
        break;
      }
    }
    out(i) = chosen;
  }
  return out;
}

Eigen::VectorXd gbm_values(const GradientBoostingState& s, const FeatureMatrix& x, std::size_t stages) {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), s.initial);
  const std::size_t m = std::min(stages, s.stages.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < m; ++k) out(i) += s.learning_rate * s.stages[k].predict_value(x.row(i));
  }
  return out;
}

Eigen::MatrixXd net_proba(const NeuralNetState& s, const FeatureMatrix& x) {
  Eigen::MatrixXd z = (x.rowwise() - s.input_mean.transpose()).array().rowwise() / s.input_scale.transpose().array();
  return nn::forward(s.layers, z);
}

}  // namespace

Prediction TrainedModel::predict(const FeatureMatrix& x, std::span<const std::string> columns) const {
  const auto& names = metadata_.feature_names;
  if (static_cast<std::size_t>(x.cols()) != names.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "model expects " + std::to_string(names.size()) + " features, got " +
                                                std::to_string(x.cols()));
  }
  if (!columns.empty() && !std::equal(columns.begin(), columns.end(), names.begin(), names.end())) {
    throw Error(ErrorCode::kSchemaMismatch, "feature columns differ from the training schema");
  }
  if (!x.allFinite()) throw Error(ErrorCode::kSchemaMismatch, "feature matrix contains non-finite values");

  Prediction p;
  p.kind = target();
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ForestState>) {
          if (p.kind == TargetKind::kClassification) {
            p.probabilities = forest_proba(s, x);
          } else {
            p.values = forest_values(s, x);
          }
        } else if constexpr (std::is_same_v<S, AdaBoostState>) {
          if (p.kind == TargetKind::kClassification) {
            p.probabilities = adaboost_proba(s, x);
          } else {
            p.values = adaboost_values(s, x);
          }
        } else if constexpr (std::is_same_v<S, GradientBoostingState>) {
          p.values = gbm_values(s, x, s.stages.size());
        } else {
          p.probabilities = net_proba(s, x);
        }
      },
      state_);
  if (p.kind == TargetKind::kRegression) p.values = p.values.unaryExpr(&clamp_mmse);
  return p;
}

Eigen::VectorXd TrainedModel::staged_raw_regression(const FeatureMatrix& x, std::size_t stages) const {
  if (const auto* s = std::get_if<GradientBoostingState>(&state_)) return gbm_values(*s, x, stages);
  throw Error(ErrorCode::kSchemaMismatch, "staged predictions need a gradient boosting model");
}

Prediction predict(const TrainedModel& m, const FeatureMatrix& x, std::span<const std::string> columns) {
  return m.predict(x, columns);
}

TrainedModel fit_model(const Dataset& d, LearnerFamily family, const Json& hp, unsigned jobs) {
  switch (family) {
    case LearnerFamily::kRandomForest: return fit_random_forest(d, forest_params_from_json(hp), jobs);
    case LearnerFamily::kAdaBoost: return fit_adaboost(d, adaboost_params_from_json(hp));
    case LearnerFamily::kGradientBoosting:
      if (d.kind != TargetKind::kRegression) {
        throw Error(ErrorCode::kInvalidHyperparameter, "gradient boosting is regression-only");
      }
      return fit_gradient_boosting(d, gbm_params_from_json(hp));
    case LearnerFamily::kNeuralNet:
      if (d.kind != TargetKind::kClassification) {
        throw Error(ErrorCode::kInvalidHyperparameter, "the network learner is classification-only");
      }
      return fit_neural_net(d, neural_net_params_from_json(hp));
  }
  throw Error(ErrorCode::kInvalidHyperparameter, "unknown learner family");
}

}  // namespace cogmark
