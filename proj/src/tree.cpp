#include "cogmark/tree.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "cogmark/serialize.hpp"
#include "cogmark/types.hpp"

namespace cogmark {

namespace {

// Replacement needs a margin so float noise cannot override the tie-break.
bool improves(double candidate, double best) {
  if (std::isinf(best)) return candidate < best;
  return candidate < best - 1e-12 * std::max(1.0, std::abs(best));
}

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

void sort_by_feature(const FeatureMatrix& x, int feature, std::vector<std::size_t>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [&](std::size_t a, std::size_t b) { return x(a, feature) < x(b, feature); });
}

double gini_mass(const std::array<double, kNumClasses>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double sq = 0.0;
  for (double c : counts) sq += c * c;
  return total - sq / total;
}

}  // namespace

SplitChoice best_classification_split(const FeatureMatrix& x, std::span<const int> labels,
                                      std::span<const double> weights, std::span<const std::size_t> rows,
                                      std::span<const int> features, int min_samples_leaf) {
  SplitChoice best;
  best.score = INFINITY;
  const std::size_t n = rows.size();
  if (n < 2) return best;
  std::array<double, kNumClasses> total{};
  double total_w = 0.0;
  for (std::size_t r : rows) {
    total[labels[r]] += weights[r];
    total_w += weights[r];
  }
  const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, min_samples_leaf));
  std::vector<std::size_t> sorted(rows.begin(), rows.end());
  for (int f : features) {
    sort_by_feature(x, f, sorted);
    std::array<double, kNumClasses> left{};
    double left_w = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t r = sorted[i];
      left[labels[r]] += weights[r];
      left_w += weights[r];
      const double lo = x(r, f);
      const double hi = x(sorted[i + 1], f);
      if (!(lo < hi)) continue;
      if (i + 1 < min_leaf || n - (i + 1) < min_leaf) continue;
      std::array<double, kNumClasses> right{};
      for (int k = 0; k < kNumClasses; ++k) right[k] = total[k] - left[k];
      const double score = gini_mass(left, left_w) + gini_mass(right, total_w - left_w);
      if (improves(score, best.score)) best = {f, midpoint(lo, hi), score};
    }
  }
  return best;
}

SplitChoice best_regression_split(const FeatureMatrix& x, std::span<const double> targets,
                                  std::span<const double> weights, std::span<const std::size_t> rows,
                                  std::span<const int> features, int min_samples_leaf) {
  SplitChoice best;
  best.score = INFINITY;
  const std::size_t n = rows.size();
  if (n < 2) return best;
  double total_w = 0.0;
  double mean = 0.0;
  for (std::size_t r : rows) {
    total_w += weights[r];
    mean += weights[r] * targets[r];
  }
  mean = total_w > 0.0 ? mean / total_w : 0.0;
  double total_s = 0.0;
  double total_ss = 0.0;
  for (std::size_t r : rows) {
    const double d = targets[r] - mean;
    total_s += weights[r] * d;
    total_ss += weights[r] * d * d;
  }
  auto sse = [](double w, double s, double ss) { return w > 0.0 ? std::max(0.0, ss - s * s / w) : 0.0; };

  const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, min_samples_leaf));
  std::vector<std::size_t> sorted(rows.begin(), rows.end());
  for (int f : features) {
    sort_by_feature(x, f, sorted);
    double lw = 0.0, ls = 0.0, lss = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t r = sorted[i];
      const double d = targets[r] - mean;
      lw += weights[r];
      ls += weights[r] * d;
      lss += weights[r] * d * d;
      const double lo = x(r, f);
      const double hi = x(sorted[i + 1], f);
      if (!(lo < hi)) continue;
      if (i + 1 < min_leaf || n - (i + 1) < min_leaf) continue;
      const double score = sse(lw, ls, lss) + sse(total_w - lw, total_s - ls, total_ss - lss);
      if (improves(score, best.score)) best = {f, midpoint(lo, hi), score};
    }
  }
  return best;
}

namespace {

enum class Criterion { kGini, kSquaredError };

struct Builder {
  const FeatureMatrix& x;
  std::span<const int> labels;
  std::span<const double> targets;
  std::span<const double> weights;
  const TreeParams& params;
  Rng* rng;
  Criterion criterion;
  std::vector<TreeNode>& nodes;

  std::vector<double> leaf_value(std::span<const std::size_t> rows) const {
    double total_w = 0.0;
    if (criterion == Criterion::kGini) {
      std::vector<double> probs(kNumClasses, 0.0);
      for (std::size_t r : rows) {
        probs[labels[r]] += weights[r];
        total_w += weights[r];
      }
      if (total_w > 0.0) {
        for (double& p : probs) p /= total_w;
      } else {
        std::fill(probs.begin(), probs.end(), 1.0 / kNumClasses);
      }
      return probs;
    }
    double sum = 0.0;
    for (std::size_t r : rows) {
      sum += weights[r] * targets[r];
      total_w += weights[r];
    }
    return {total_w > 0.0 ? sum / total_w : 0.0};
  }

  bool pure(std::span<const std::size_t> rows) const {
    if (criterion == Criterion::kGini) {
      const int first = labels[rows.front()];
      return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return labels[r] == first; });
    }
    const double first = targets[rows.front()];
    return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return targets[r] == first; });
  }

  std::vector<int> candidate_features(std::span<const std::size_t> rows) const {
    const int d = static_cast<int>(x.cols());
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    if (!params.features_per_split || *params.features_per_split >= d || rng == nullptr) return all;
    // Draw features in random order until enough non-constant ones are found.
    rng->shuffle(std::span<int>(all));
    const int want = std::max(1, *params.features_per_split);
    std::vector<int> chosen;
    int informative = 0;
    for (int f : all) {
      chosen.push_back(f);
      const double v0 = x(rows.front(), f);
      const bool varies = std::any_of(rows.begin(), rows.end(), [&](std::size_t r) { return x(r, f) != v0; });
      if (varies && ++informative >= want) break;
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  int build(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[id].value = leaf_value(rows);
    const bool depth_ok = !params.max_depth || depth < *params.max_depth;
    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params.min_samples_leaf));
    if (!depth_ok || rows.size() < 2 * min_leaf || pure(rows)) return id;

    const auto features = candidate_features(rows);
    const SplitChoice split =
        criterion == Criterion::kGini
            ? best_classification_split(x, labels, weights, rows, features, params.min_samples_leaf)
            : best_regression_split(x, targets, weights, rows, features, params.min_samples_leaf);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x(r, split.feature) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    nodes[id].feature = split.feature;
    nodes[id].threshold = split.threshold;
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

}  // namespace

DecisionTree DecisionTree::fit_classifier(const FeatureMatrix& x, std::span<const int> labels,
                                          std::span<const double> weights, std::span<const std::size_t> rows,
                                          const TreeParams& params, Rng* rng) {
  DecisionTree tree;
  Builder b{x, labels, {}, weights, params, rng, Criterion::kGini, tree.nodes_};
  b.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
  return tree;
}

DecisionTree DecisionTree::fit_regressor(const FeatureMatrix& x, std::span<const double> targets,
                                         std::span<const double> weights, std::span<const std::size_t> rows,
                                         const TreeParams& params, Rng* rng) {
  DecisionTree tree;
  Builder b{x, {}, targets, weights, params, rng, Criterion::kSquaredError, tree.nodes_};
  b.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
  return tree;
}

const std::vector<double>& DecisionTree::leaf_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int id = 0;
  while (!nodes_[id].is_leaf()) {
    const auto& node = nodes_[id];
    id = row(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes_[id].value;
}

int DecisionTree::depth() const {
  std::vector<int> depth(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes_[i].is_leaf()) {
      depth[nodes_[i].left] = depth[i] + 1;
      depth[nodes_[i].right] = depth[i] + 1;
    }
  }
  return deepest;
}

void DecisionTree::write(ByteWriter& out) const {
  out.u32(static_cast<std::uint32_t>(nodes_.size()));
  for (const auto& n : nodes_) {
    out.i32(n.feature);
    out.f64(n.threshold);
    out.i32(n.left);
    out.i32(n.right);
    out.f64s(n.value);
  }
}

DecisionTree DecisionTree::read(ByteReader& in, std::size_t dim) {
  DecisionTree tree;
  const std::uint32_t count = in.u32();
  if (count == 0 || count > in.remaining()) throw Error(ErrorCode::kChecksumFailure, "bad tree node count");
  tree.nodes_.resize(count);
  for (auto& n : tree.nodes_) {
    n.feature = in.i32();
    n.threshold = in.f64();
    n.left = in.i32();
    n.right = in.i32();
    n.value = in.f64s();
    if (n.value.empty()) throw Error(ErrorCode::kChecksumFailure, "tree node without value");
  }
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    const auto& n = tree.nodes_[i];
    if (n.is_leaf()) continue;
    if (n.feature >= static_cast<int>(dim)) throw Error(ErrorCode::kChecksumFailure, "tree feature out of range");
    const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(count); };
    if (!in_range(n.left) || !in_range(n.right)) throw Error(ErrorCode::kChecksumFailure, "bad tree child index");
  }
  return tree;
}

}  // namespace cogmark
