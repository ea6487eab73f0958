#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cogmark/dataset.hpp"
#include "cogmark/rng.hpp"

namespace cogmark {

class ByteWriter;
class ByteReader;

struct TreeParams {
  std::optional<int> max_depth;  // unlimited when empty
  int min_samples_leaf = 1;
  std::optional<int> features_per_split;  // all features when empty
};

struct SplitChoice {
  int feature = -1;  // -1: no valid split
  double threshold = 0.0;
  double score = 0.0;  // weighted child impurity (Gini mass or squared error)
};

// Exhaustive CART split over `features` (ascending) for the given rows.
// Samples with x <= threshold go left. Ties keep the lowest feature index,
// then the lowest threshold.
SplitChoice best_classification_split(const FeatureMatrix& x, std::span<const int> labels,
                                      std::span<const double> weights, std::span<const std::size_t> rows,
                                      std::span<const int> features, int min_samples_leaf);
SplitChoice best_regression_split(const FeatureMatrix& x, std::span<const double> targets,
                                  std::span<const double> weights, std::span<const std::size_t> rows,
                                  std::span<const int> features, int min_samples_leaf);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;  // class probabilities (3) or a single mean

  bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
 public:
  // `weights` is indexed like the dataset rows; `rows` selects the training
  // rows (duplicates allowed). `rng` is needed only with feature subsampling.
  static DecisionTree fit_classifier(const FeatureMatrix& x, std::span<const int> labels,
                                     std::span<const double> weights, std::span<const std::size_t> rows,
                                     const TreeParams& params, Rng* rng = nullptr);
  static DecisionTree fit_regressor(const FeatureMatrix& x, std::span<const double> targets,
                                    std::span<const double> weights, std::span<const std::size_t> rows,
                                    const TreeParams& params, Rng* rng = nullptr);

  const std::vector<double>& leaf_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  double predict_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const { return leaf_value(row)[0]; }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;

  void write(ByteWriter& out) const;
  static DecisionTree read(ByteReader& in, std::size_t dim);

 private:
  std::vector<TreeNode> nodes_;
};

}  // namespace cogmark
