#include <cmath>

#include "cogmark/error.hpp"
#include "cogmark/learners.hpp"
#include "cogmark/parallel.hpp"
#include "cogmark/rng.hpp"
#include "learner_common.hpp"

namespace cogmark {

namespace detail {

CanonicalData canonicalize(const Dataset& d) {
  const auto order = d.canonical_order();
  CanonicalData c;
  c.x.resize(d.x.rows(), d.x.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    c.x.row(static_cast<Eigen::Index>(i)) = d.x.row(static_cast<Eigen::Index>(order[i]));
    if (d.kind == TargetKind::kClassification) {
      c.labels.push_back(d.labels[order[i]]);
    } else {
      c.targets.push_back(d.targets[order[i]]);
    }
  }
  return c;
}

TrainingMetadata make_metadata(const Dataset& d, std::uint64_t seed) {
  TrainingMetadata meta;
  meta.seed = seed;
  meta.dataset_fingerprint = d.fingerprint();
  meta.training_rows = static_cast<std::uint32_t>(d.size());
  meta.feature_names = d.columns;
  return meta;
}

}  // namespace detail

TrainedModel fit_random_forest(const Dataset& d, const ForestParams& hp, unsigned jobs) {
  d.validate();
  if (hp.n_trees < 1) throw Error(ErrorCode::kInvalidHyperparameter, "n_trees must be at least 1");
  const bool classification = d.kind == TargetKind::kClassification;
  if (classification && d.size() < 2) {
    throw Error(ErrorCode::kDegenerateDataset, "classification forest needs at least 2 samples");
  }
  const auto data = detail::canonicalize(d);
  const std::size_t n = d.size();
  const int dim = static_cast<int>(d.dim());

  ForestParams resolved = hp;
  if (!resolved.features_per_split) {
    resolved.features_per_split = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(dim)))));
  }
  TreeParams tree_params{resolved.max_depth, resolved.min_samples_leaf, resolved.features_per_split};

  ForestState state;
  state.trees.resize(static_cast<std::size_t>(hp.n_trees));
  parallel_for(state.trees.size(), jobs, [&](std::size_t t) {
    Rng rng(derive_seed(hp.seed, t));
    std::vector<double> counts(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) counts[rng.index(n)] += 1.0;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[i] > 0.0) rows.push_back(i);
    }
    state.trees[t] = classification
                         ? DecisionTree::fit_classifier(data.x, data.labels, counts, rows, tree_params, &rng)
                         : DecisionTree::fit_regressor(data.x, data.targets, counts, rows, tree_params, &rng);
  });

  const ModelKind kind = classification ? ModelKind::kRandomForestClassifier : ModelKind::kRandomForestRegressor;
  return TrainedModel(kind, to_json(resolved), std::move(state), detail::make_metadata(d, hp.seed));
}

}  // namespace cogmark
