#include "cogmark/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cogmark/error.hpp"
#include "cogmark/parallel.hpp"
#include "cogmark/rng.hpp"
#include "cogmark/types.hpp"

namespace cogmark {

namespace {

template <typename A, typename B>
void check_lengths(std::span<A> a, std::span<B> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw Error(ErrorCode::kEmptyInput, "no samples to score");
}

}  // namespace

ClassificationMetrics macro_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  check_lengths(y_true, y_pred);
  ClassificationMetrics m;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
      throw Error(ErrorCode::kUnknownDiagnosisLabel, "label index out of range at position " + std::to_string(i));
    }
    ++m.confusion[t][p];
  }
  double f1_sum = 0.0;
  for (int k = 0; k < kNumClasses; ++k) {
    long predicted = 0;
    long actual = 0;
    for (int j = 0; j < kNumClasses; ++j) {
      predicted += m.confusion[j][k];
      actual += m.confusion[k][j];
    }
    const long tp = m.confusion[k][k];
    const std::string name(diagnosis_name(static_cast<Diagnosis>(k)));
    if (predicted > 0) {
      m.precision[k] = static_cast<double>(tp) / static_cast<double>(predicted);
    } else {
      m.zero_division.push_back("precision:" + name);
    }
    if (actual > 0) {
      m.recall[k] = static_cast<double>(tp) / static_cast<double>(actual);
    } else {
      m.zero_division.push_back("recall:" + name);
    }
    const double pr = m.precision[k] + m.recall[k];
    f1_sum += pr > 0.0 ? 2.0 * m.precision[k] * m.recall[k] / pr : 0.0;
  }
  m.macro_precision = (m.precision[0] + m.precision[1] + m.precision[2]) / 3.0;
  m.macro_recall = (m.recall[0] + m.recall[1] + m.recall[2]) / 3.0;
  const double pr = m.macro_precision + m.macro_recall;
  m.macro_f1 = pr > 0.0 ? 2.0 * m.macro_precision * m.macro_recall / pr : 0.0;
  m.macro_f1_per_class_avg = f1_sum / 3.0;
  return m;
}

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred);
  double sse = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_pred[i];
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(y_true.size()));
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != fold) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Shuffles each stratum and deals its rows round-robin; the dealing position
// carries over between strata so fold sizes stay within one of each other.
FoldPlan deal(std::vector<int> strata, int k, std::uint64_t seed) {
  const std::size_t n = strata.size();
  if (k < 2) throw Error(ErrorCode::kInvalidConfig, "k must be at least 2");
  if (n < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kTooFewSamples, std::to_string(n) + " rows cannot fill " + std::to_string(k) + " folds");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  const int max_stratum = *std::max_element(strata.begin(), strata.end());
  Rng rng(seed);
  std::size_t position = 0;
  for (int s = 0; s <= max_stratum; ++s) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (strata[i] == s) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i : members) plan.folds[position++ % static_cast<std::size_t>(k)].push_back(i);
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  plan.strata = std::move(strata);
  return plan;
}

}  // namespace

FoldPlan make_folds(std::span<const int> labels, int k, std::uint64_t seed, bool stratify) {
  std::vector<int> strata(labels.size(), 0);
  if (stratify) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0) throw Error(ErrorCode::kInvalidDataset, "negative stratum label");
      strata[i] = labels[i];
    }
  }
  FoldPlan plan = deal(std::move(strata), k, seed);
  if (stratify) {
    std::vector<std::size_t> counts;
    for (int s : plan.strata) {
      if (static_cast<std::size_t>(s) >= counts.size()) counts.resize(static_cast<std::size_t>(s) + 1, 0);
      ++counts[static_cast<std::size_t>(s)];
    }
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (counts[s] > 0 && counts[s] < static_cast<std::size_t>(k)) {
        const std::string name = s < 3 ? std::string(diagnosis_name(static_cast<Diagnosis>(s))) : std::to_string(s);
        plan.warnings.push_back("ClassSmallerThanK: class " + name + " has " + std::to_string(counts[s]) +
                                " rows for " + std::to_string(k) + " folds; some folds will not contain it");
      }
    }
  }
  return plan;
}

FoldPlan make_folds(std::span<const double> targets, int k, std::uint64_t seed, bool stratify) {
  std::vector<int> strata(targets.size(), 0);
  if (stratify && !targets.empty()) {
    std::vector<std::size_t> order(targets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return targets[a] < targets[b]; });
    for (std::size_t r = 0; r < order.size(); ++r) {
      strata[order[r]] = static_cast<int>(r * kRegressionStrataBins / order.size());
    }
  }
  return deal(std::move(strata), k, seed);
}

FoldPlan make_folds(const Dataset& d, int k, std::uint64_t seed, bool stratify) {
  return d.kind == TargetKind::kClassification ? make_folds(std::span<const int>(d.labels), k, seed, stratify)
                                               : make_folds(std::span<const double>(d.targets), k, seed, stratify);
}

// ---------------------------------------------------------------------------
// Grid search

Objective objective_for(TargetKind kind) {
  return kind == TargetKind::kClassification ? Objective::kMacroF1 : Objective::kRmse;
}

std::string_view objective_name(Objective objective) {
  return objective == Objective::kMacroF1 ? "macro_f1" : "rmse";
}

std::vector<Json> expand_grid(const Json& grid) {
  if (!grid.is_object()) throw Error(ErrorCode::kInvalidConfig, "grid must be an object of value lists");
  std::vector<std::string> keys;
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "grid entry '" + key + "' must be a nonempty list");
    }
    keys.push_back(key);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<Json> points{Json::object()};
  for (const auto& key : keys) {
    std::vector<Json> next;
    for (const auto& point : points) {
      for (const auto& value : grid.at(key)) {
        Json p = point;
        p[key] = value;
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  return points;
}

GridResult grid_search(const Dataset& d, LearnerFamily family, const Json& grid, const FoldPlan& folds,
                       Objective objective, const Json& base, unsigned jobs) {
  d.validate();
  if (folds.size() != d.size()) throw Error(ErrorCode::kLengthMismatch, "fold plan does not match the dataset");
  GridResult result;
  result.objective = objective;
  for (auto& point : expand_grid(grid)) {
    GridCell cell;
    cell.params = base.is_object() ? base : Json::object();
    for (const auto& [key, value] : point.items()) cell.params[key] = value;
    result.cells.push_back(std::move(cell));
  }

  const std::size_t k = folds.folds.size();
  const std::size_t tasks = result.cells.size() * k;
  std::vector<double> scores(tasks, 0.0);
  std::vector<std::optional<Error>> failures(tasks);
  parallel_for(tasks, jobs, [&](std::size_t t) {
    const auto& cell = result.cells[t / k];
    const std::size_t fold = t % k;
    try {
      const Dataset train = d.subset(folds.train_indices(fold));
      const Dataset test = d.subset(folds.folds[fold]);
      const TrainedModel model = fit_model(train, family, cell.params);
      const Prediction p = model.predict(test.x);
      if (objective == Objective::kMacroF1) {
        const auto labels = p.labels();
        scores[t] = macro_metrics(test.labels, labels).macro_f1;
      } else {
        scores[t] = rmse(test.targets, std::span<const double>(p.values.data(), static_cast<std::size_t>(p.values.size())));
      }
    } catch (const Error& e) {
      failures[t] = e;
    }
  });

  std::optional<Error> first_failure;
  bool have_best = false;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    auto& cell = result.cells[c];
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t t = c * k + f;
      if (failures[t]) {
        if (!cell.error) cell.error = failures[t]->what();
        if (!first_failure) first_failure = failures[t];
      }
      cell.fold_scores.push_back(scores[t]);
    }
    if (cell.error) {
      cell.fold_scores.clear();
      continue;
    }
    cell.mean = std::accumulate(cell.fold_scores.begin(), cell.fold_scores.end(), 0.0) / static_cast<double>(k);
    const double best = have_best ? result.cells[result.best_index].mean : 0.0;
    const bool better = objective == Objective::kMacroF1 ? cell.mean > best : cell.mean < best;
    if (!have_best || better) {
      result.best_index = c;
      have_best = true;
    }
  }
  if (!have_best) throw *first_failure;
  return result;
}

std::string format_grid_table(const GridResult& result) {
  std::string out = "cell\tmean_" + std::string(objective_name(result.objective)) + "\tfold_scores\tparams\n";
  char buf[64];
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const auto& cell = result.cells[c];
    out += std::to_string(c) + (c == result.best_index ? "*" : "") + "\t";
    if (cell.error) {
      out += "failed\t-\t" + cell.params.dump() + "\t" + *cell.error + "\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%.6f", cell.mean);
    out += buf;
    out += "\t";
    for (std::size_t f = 0; f < cell.fold_scores.size(); ++f) {
      std::snprintf(buf, sizeof buf, "%s%.4f", f ? "," : "", cell.fold_scores[f]);
      out += buf;
    }
    out += "\t" + cell.params.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

Json to_json(const ClassificationMetrics& m) {
  Json confusion = Json::array();
  for (const auto& row : m.confusion) confusion.push_back(Json(std::vector<long>(row.begin(), row.end())));
  Json per_class = Json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    per_class[std::string(diagnosis_name(static_cast<Diagnosis>(k)))] =
        Json{{"precision", m.precision[k]}, {"recall", m.recall[k]}};
  }
  return Json{{"macro_precision", m.macro_precision},
              {"macro_recall", m.macro_recall},
              {"macro_f1", m.macro_f1},
              {"macro_f1_per_class_avg", m.macro_f1_per_class_avg},
              {"per_class", per_class},
              {"confusion_matrix", confusion},
              {"zero_division", m.zero_division}};
}

Json to_json(const EvalReport& r) {
  Json j{{"task", r.kind == TargetKind::kClassification ? "classification" : "regression"},
         {"n", r.n},
         {"config", r.config_name},
         {"config_fingerprint", r.config_fingerprint},
         {"seed", r.seed}};
  if (r.classification) j["metrics"] = to_json(*r.classification);
  if (r.rmse) j["rmse"] = *r.rmse;
  if (!r.per_fold.empty()) {
    j["per_fold"] = r.per_fold;
    j["per_fold_mean"] = std::accumulate(r.per_fold.begin(), r.per_fold.end(), 0.0) / static_cast<double>(r.per_fold.size());
  }
  return j;
}

std::string serialize_report(const EvalReport& report) { return to_json(report).dump(2) + "\n"; }

}  // namespace cogmark
