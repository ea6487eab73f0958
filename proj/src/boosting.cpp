#include <algorithm>
#include <cmath>
#include <numeric>

#include "cogmark/error.hpp"
#include "cogmark/learners.hpp"
#include "cogmark/rng.hpp"
#include "cogmark/types.hpp"
#include "learner_common.hpp"

namespace cogmark {

namespace {

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(v.size()); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

void normalize(std::vector<double>& w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
}

// Multi-class staged exponential loss (SAMME) over weighted shallow trees.
TrainedModel fit_adaboost_classifier(const Dataset& d, const AdaBoostParams& hp) {
  const auto data = detail::canonicalize(d);
  const std::size_t n = d.size();
  auto meta = detail::make_metadata(d, hp.seed);

  AdaBoostParams resolved = hp;
  if (!resolved.base_depth) resolved.base_depth = 1;

  AdaBoostState state;
  state.fallback.assign(kNumClasses, 0.0);
  for (int y : data.labels) state.fallback[y] += 1.0 / static_cast<double>(n);
  for (int k = 0; k < kNumClasses; ++k) {
    if (state.fallback[k] > 0.0) state.present_classes.push_back(k);
  }
  const int classes = static_cast<int>(state.present_classes.size());

  if (classes >= 2) {
    const TreeParams tree_params{resolved.base_depth, 1, std::nullopt};
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    const double chance_error = 1.0 - 1.0 / classes;
    std::vector<bool> miss(n);
    for (int m = 0; m < hp.n_estimators; ++m) {
      auto tree = DecisionTree::fit_classifier(data.x, data.labels, w, rows, tree_params);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        miss[i] = argmax(tree.leaf_value(data.x.row(static_cast<Eigen::Index>(i)))) != data.labels[i];
        if (miss[i]) err += w[i];
      }
      if (err >= chance_error) break;
      const bool perfect = err <= 1e-10;
      const double e = std::max(err, 1e-10);
      const double alpha = hp.learning_rate * (std::log((1.0 - e) / e) + std::log(classes - 1.0));
      state.stages.push_back(std::move(tree));
      state.stage_weights.push_back(alpha);
      if (perfect) break;
      for (std::size_t i = 0; i < n; ++i) {
        if (miss[i]) w[i] *= std::exp(alpha);
      }
      normalize(w);
    }
    meta.fallback = hp.n_estimators > 0 && state.stages.empty();
  } else {
    meta.fallback = true;
  }
  return TrainedModel(ModelKind::kAdaBoostClassifier, to_json(resolved), std::move(state), std::move(meta));
}

// Weighted-median boosting with weighted bootstrap resampling (AdaBoost.R2,
// linear loss).
TrainedModel fit_adaboost_regressor(const Dataset& d, const AdaBoostParams& hp) {
  const auto data = detail::canonicalize(d);
  const std::size_t n = d.size();
  auto meta = detail::make_metadata(d, hp.seed);

  AdaBoostParams resolved = hp;
  if (!resolved.base_depth) resolved.base_depth = 3;

  AdaBoostState state;
  const double mean = std::accumulate(data.targets.begin(), data.targets.end(), 0.0) / static_cast<double>(n);
  state.fallback = {mean};
  const bool constant = std::all_of(data.targets.begin(), data.targets.end(),
                                    [&](double y) { return y == data.targets.front(); });
  if (constant) {
    meta.fallback = true;
    return TrainedModel(ModelKind::kAdaBoostRegressor, to_json(resolved), std::move(state), std::move(meta));
  }

  const TreeParams tree_params{resolved.base_depth, 1, std::nullopt};
  Rng rng(hp.seed);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<double> cdf(n);
  std::vector<double> counts(n);
  std::vector<double> err(n);
  for (int m = 0; m < hp.n_estimators; ++m) {
    std::partial_sum(w.begin(), w.end(), cdf.begin());
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform() * cdf.back();
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      counts[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), n - 1)] += 1.0;
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[i] > 0.0) rows.push_back(i);
    }
    auto tree = DecisionTree::fit_regressor(data.x, data.targets, counts, rows, tree_params);

    double max_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = std::abs(tree.predict_value(data.x.row(static_cast<Eigen::Index>(i))) - data.targets[i]);
      max_err = std::max(max_err, err[i]);
    }
    if (max_err == 0.0) {
      state.stages.push_back(std::move(tree));
      state.stage_weights.push_back(1.0);
      break;
    }
    double avg_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err[i] /= max_err;
      avg_loss += w[i] * err[i];
    }
    if (avg_loss >= 0.5) break;
    const double beta = std::max(avg_loss / (1.0 - avg_loss), 1e-10);
    const double alpha = hp.learning_rate * std::log(1.0 / beta);
    state.stages.push_back(std::move(tree));
    state.stage_weights.push_back(alpha);
    for (std::size_t i = 0; i < n; ++i) w[i] *= std::pow(beta, (1.0 - err[i]) * hp.learning_rate);
    normalize(w);
  }
  meta.fallback = hp.n_estimators > 0 && state.stages.empty();
  return TrainedModel(ModelKind::kAdaBoostRegressor, to_json(resolved), std::move(state), std::move(meta));
}

}  // namespace

TrainedModel fit_adaboost(const Dataset& d, const AdaBoostParams& hp) {
  d.validate();
  if (hp.n_estimators < 0 || !(hp.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidHyperparameter, "adaboost needs n_estimators >= 0 and learning_rate > 0");
  }
  if (d.kind == TargetKind::kClassification && d.size() < 2) {
    throw Error(ErrorCode::kDegenerateDataset, "classification boosting needs at least 2 samples");
  }
  return d.kind == TargetKind::kClassification ? fit_adaboost_classifier(d, hp) : fit_adaboost_regressor(d, hp);
}

TrainedModel fit_gradient_boosting(const Dataset& d, const GradientBoostingParams& hp) {
  d.validate();
  if (d.kind != TargetKind::kRegression) {
    throw Error(ErrorCode::kInvalidDataset, "gradient boosting needs regression targets");
  }
  if (hp.n_estimators < 0 || !(hp.learning_rate > 0.0) || hp.max_depth < 1) {
    throw Error(ErrorCode::kInvalidHyperparameter, "invalid gradient boosting hyperparameters");
  }
  const auto data = detail::canonicalize(d);
  const std::size_t n = d.size();

  GradientBoostingState state;
  state.learning_rate = hp.learning_rate;
  state.initial = std::accumulate(data.targets.begin(), data.targets.end(), 0.0) / static_cast<double>(n);

  const TreeParams tree_params{hp.max_depth, 1, std::nullopt};
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const std::vector<double> ones(n, 1.0);
  std::vector<double> fitted(n, state.initial);
  std::vector<double> residual(n);
  for (int m = 0; m < hp.n_estimators; ++m) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = data.targets[i] - fitted[i];
    auto tree = DecisionTree::fit_regressor(data.x, residual, ones, rows, tree_params);
    for (std::size_t i = 0; i < n; ++i) {
      fitted[i] += hp.learning_rate * tree.predict_value(data.x.row(static_cast<Eigen::Index>(i)));
    }
    state.stages.push_back(std::move(tree));
  }
  return TrainedModel(ModelKind::kGradientBoostingRegressor, to_json(hp), std::move(state),
                      detail::make_metadata(d, hp.seed));
}

}  // namespace cogmark
