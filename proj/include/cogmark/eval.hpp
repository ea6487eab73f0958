#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogmark/learners.hpp"

namespace cogmark {

using ConfusionMatrix = std::array<std::array<long, 3>, 3>;  // [true][predicted]

struct ClassificationMetrics {
  ConfusionMatrix confusion{};
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;  // harmonic mean of macro precision and macro recall
  double macro_f1_per_class_avg = 0.0;  // reported only
  // "precision:<CLASS>" / "recall:<CLASS>" for every ratio with a zero denominator.
  std::vector<std::string> zero_division;
};

ClassificationMetrics macro_metrics(std::span<const int> y_true, std::span<const int> y_pred);
double rmse(std::span<const double> y_true, std::span<const double> y_pred);

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // ascending indices per fold
  std::vector<int> strata;                      // stratum of every row
  std::vector<std::string> warnings;

  std::size_t size() const { return strata.size(); }
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

inline constexpr int kRegressionStrataBins = 4;

FoldPlan make_folds(std::span<const int> labels, int k, std::uint64_t seed, bool stratify = true);
FoldPlan make_folds(std::span<const double> targets, int k, std::uint64_t seed, bool stratify = true);
FoldPlan make_folds(const Dataset& d, int k, std::uint64_t seed, bool stratify = true);

enum class Objective { kMacroF1, kRmse };

Objective objective_for(TargetKind kind);
std::string_view objective_name(Objective objective);

struct GridCell {
  Json params;
  std::vector<double> fold_scores;
  double mean = 0.0;
  std::optional<std::string> error;  // failed cells carry the learner error
};

struct GridResult {
  Objective objective = Objective::kMacroF1;
  std::vector<GridCell> cells;  // grid order
  std::size_t best_index = 0;

  const GridCell& best() const { return cells[best_index]; }
};

// Cartesian product in sorted key order, values in the order given.
std::vector<Json> expand_grid(const Json& grid);

// Every cell is fitted on each fold's training part with `base` overlaid by
// the cell's values. Throws the first cell's error if every cell failed.
GridResult grid_search(const Dataset& d, LearnerFamily family, const Json& grid, const FoldPlan& folds,
                       Objective objective, const Json& base = Json::object(), unsigned jobs = 1);

std::string format_grid_table(const GridResult& result);

struct EvalReport {
  TargetKind kind = TargetKind::kClassification;
  std::size_t n = 0;
  std::optional<ClassificationMetrics> classification;
  std::optional<double> rmse;
  std::vector<double> per_fold;
  std::string config_name;
  std::uint32_t config_fingerprint = 0;
  std::uint64_t seed = 0;
};

Json to_json(const ClassificationMetrics& m);
Json to_json(const EvalReport& report);
// Pretty-printed JSON with a trailing newline; identical inputs give identical bytes.
std::string serialize_report(const EvalReport& report);

}  // namespace cogmark
