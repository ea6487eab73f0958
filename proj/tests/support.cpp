#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/rational.hpp>

#include <unistd.h>

#include "cogmark/error.hpp"
#include "cogmark/eval.hpp"
#include "cogmark/rng.hpp"
#include "cogmark/transcript.hpp"

namespace cogmark::test {

using Q = boost::rational<long long>;

namespace {

double to_double(const Q& q) { return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator()); }

}  // namespace

std::filesystem::path fixture_dir() { return COGMARK_FIXTURE_DIR; }

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  path_ = std::filesystem::temp_directory_path() /
          ("cogmark_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Counts in field order: pronoun, definite, indefinite, filler, total,
// actual, adverbial adjunct, punct sentences, block sentences, minimal
// clauses, comprehensive clauses, adjunct clauses.
const std::vector<FeatureFixture>& feature_fixtures() {
  static const std::vector<FeatureFixture> fixtures = [] {
    auto counts = [](std::array<long, 12> c) {
      LinguisticCounts k;
      k.pronoun_count = c[0];
      k.definite_np_count = c[1];
      k.indefinite_np_count = c[2];
      k.filler_word_count = c[3];
      k.total_word_count = c[4];
      k.actual_word_count = c[5];
      k.adverbial_adjunct_count = c[6];
      k.total_sentence_count_punct = c[7];
      k.total_sentence_count_sentstruct = c[8];
      k.total_clause_count_minimal = c[9];
      k.total_clause_count_comprehensive = c[10];
      k.adjunct_clause_count = c[11];
      return k;
    };
    return std::vector<FeatureFixture>{
        {"stealing.conllu", 10.0, counts({0, 1, 1, 0, 6, 6, 0, 1, 1, 1, 1, 0}),
         {10.0, 0.0, 1.0 / 2, 1.0 / 2, 2.0 / 10, 0.0, 6.0 / 10, 1.0, 0.0, 0.0, 1.0 / 10, 1.0 / 10, 0.0, 0.0}},
        {"um_he_fell.conllu", 4.0, counts({1, 0, 0, 1, 3, 2, 0, 0, 1, 1, 1, 0}),
         {4.0, 1.0, 0.0, 0.0, 1.0 / 4, 1.0 / 4, 3.0 / 4, 2.0 / 3, 0.0, 0.0, 1.0 / 4, 1.0 / 4, 0.0, 0.0}},
        {"kitchen.conllu", 30.0, counts({1, 5, 1, 1, 21, 20, 2, 2, 3, 4, 5, 1}),
         {30.0, 1.0 / 7, 5.0 / 7, 1.0 / 7, 7.0 / 30, 1.0 / 30, 21.0 / 30, 20.0 / 21, 1.0, 2.0 / 3, 4.0 / 30,
          5.0 / 30, 1.0 / 4, 1.0 / 5}},
        {"clauses.conllu", 20.0, counts({6, 2, 1, 0, 27, 27, 2, 3, 5, 6, 7, 0}),
         {20.0, 2.0 / 3, 2.0 / 9, 1.0 / 9, 9.0 / 20, 0.0, 27.0 / 20, 1.0, 2.0 / 3, 2.0 / 5, 6.0 / 20, 7.0 / 20, 0.0,
          0.0}},
        {"animals.conllu", 12.5, counts({0, 1, 5, 3, 10, 7, 0, 1, 4, 0, 0, 0}),
         {12.5, 0.0, 1.0 / 6, 5.0 / 6, 0.48, 0.24, 0.8, 0.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}},
        {"empty.conllu", 5.0, counts({0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}),
         {5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}},
    };
  }();
  return fixtures;
}

double feature_fixture_error(const FeatureFixture& fx, LinguisticCounts* counts_out) {
  const auto t = load_transcript(fixture_dir() / "transcripts" / fx.file, "F", Task::kCtd, fx.duration);
  const auto counts = extract_counts(t);
  if (counts_out) *counts_out = counts;
  const auto v = compute_features(Task::kCtd, counts, fx.duration);
  double err = 0.0;
  for (std::size_t i = 0; i < kTaskFeatureCount; ++i) err = std::max(err, std::abs(v.values()[i] - fx.features[i]));
  return err;
}

MetricOracle macro_metric_oracle(std::span<const int> y_true, std::span<const int> y_pred) {
  // Count pairs directly rather than through a matrix.
  Q p_sum = 0, r_sum = 0;
  for (int c = 0; c < 3; ++c) {
    long tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      if (y_pred[i] == c) ++predicted;
      if (y_true[i] == c) ++actual;
      if (y_pred[i] == c && y_true[i] == c) ++tp;
    }
    if (predicted > 0) p_sum += Q(tp, predicted);
    if (actual > 0) r_sum += Q(tp, actual);
  }
  const Q p = p_sum / 3;
  const Q r = r_sum / 3;
  const Q f1 = ((p + r).numerator() == 0) ? Q(0) : Q(2) * p * r / (p + r);
  return {to_double(p), to_double(r), to_double(f1)};
}

double rmse_oracle(std::span<const double> y_true, std::span<const double> y_pred) {
  long double ss = 0.0L;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const long double d = static_cast<long double>(y_true[i]) - static_cast<long double>(y_pred[i]);
    ss += d * d;
  }
  return static_cast<double>(std::sqrt(ss / static_cast<long double>(y_true.size())));
}

int metric_oracle_mismatches(int sets, std::uint64_t seed, std::string* first_failure) {
  Rng rng(seed);
  int bad = 0;
  auto fail = [&](const std::string& what) {
    if (bad++ == 0 && first_failure) *first_failure = what;
  };
  for (int s = 0; s < sets; ++s) {
    const std::size_t n = 1 + rng.index(60);
    // Some sets only use a subset of the classes, which exercises zero division.
    const int classes = 1 + static_cast<int>(rng.index(3));
    std::vector<int> y_true(n), y_pred(n);
    for (auto& v : y_true) v = static_cast<int>(rng.index(classes));
    for (auto& v : y_pred) v = static_cast<int>(rng.index(3));
    const auto m = macro_metrics(y_true, y_pred);
    const auto o = macro_metric_oracle(y_true, y_pred);
    // Both sides are within a couple of roundings of the same rational.
    const double tol = 4 * std::numeric_limits<double>::epsilon();
    if (std::abs(m.macro_precision - o.macro_precision) > tol || std::abs(m.macro_recall - o.macro_recall) > tol ||
        std::abs(m.macro_f1 - o.macro_f1) > tol) {
      fail("classification set " + std::to_string(s));
    }

    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(0.0, 30.0);
      b[i] = rng.uniform(0.0, 30.0);
    }
    if (std::abs(rmse(a, b) - rmse_oracle(a, b)) > 1e-12) fail("regression set " + std::to_string(s));
  }
  return bad;
}

namespace {

Q gini_mass(const std::array<long, 3>& counts) {
  const long n = counts[0] + counts[1] + counts[2];
  if (n == 0) return 0;
  long sq = 0;
  for (long c : counts) sq += c * c;
  return Q(n) - Q(sq, n);
}

Q sse(long n, long sum, long sum_sq) { return n == 0 ? Q(0) : Q(sum_sq) - Q(sum * sum, n); }

// Enumerates (feature, threshold) in ascending order; `score` sees the rows
// going left.
template <typename Score>
SplitOracle enumerate(const FeatureMatrix& x, int min_samples_leaf, Score score) {
  SplitOracle best;
  Q best_score;
  const long n = x.rows();
  const long min_leaf = std::max(1, min_samples_leaf);
  for (int f = 0; f < x.cols(); ++f) {
    std::vector<double> values(x.col(f).data(), x.col(f).data() + n);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double threshold = (values[i] + values[i + 1]) / 2.0;
      std::vector<bool> left(n);
      long n_left = 0;
      for (long r = 0; r < n; ++r) n_left += (left[r] = x(r, f) <= threshold);
      if (n_left < min_leaf || n - n_left < min_leaf) continue;
      const Q s = score(left);
      if (best.feature < 0 || s < best_score) {
        best = {f, threshold};
        best_score = s;
      }
    }
  }
  return best;
}

}  // namespace

SplitOracle classification_split_oracle(const FeatureMatrix& x, std::span<const int> labels, int min_samples_leaf) {
  return enumerate(x, min_samples_leaf, [&](const std::vector<bool>& left) {
    std::array<long, 3> l{}, r{};
    for (std::size_t i = 0; i < left.size(); ++i) (left[i] ? l : r)[labels[i]]++;
    return gini_mass(l) + gini_mass(r);
  });
}

SplitOracle regression_split_oracle(const FeatureMatrix& x, std::span<const int> targets, int min_samples_leaf) {
  return enumerate(x, min_samples_leaf, [&](const std::vector<bool>& left) {
    long nl = 0, sl = 0, ql = 0, nr = 0, sr = 0, qr = 0;
    for (std::size_t i = 0; i < left.size(); ++i) {
      const long y = targets[i];
      if (left[i]) {
        ++nl, sl += y, ql += y * y;
      } else {
        ++nr, sr += y, qr += y * y;
      }
    }
    return sse(nl, sl, ql) + sse(nr, sr, qr);
  });
}

SplitSuiteResult run_split_suite(int datasets, std::uint64_t seed) {
  Rng rng(seed);
  SplitSuiteResult result;
  auto fail = [&](const std::string& what) {
    if (result.mismatches++ == 0) result.first_failure = what;
  };
  for (int s = 0; s < datasets; ++s) {
    const long n = 2 + static_cast<long>(rng.index(29));
    const int d = 1 + static_cast<int>(rng.index(3));
    const int levels = 2 + static_cast<int>(rng.index(8));  // few levels -> many tied values
    const int min_leaf = 1 + static_cast<int>(rng.index(3));
    FeatureMatrix x(n, d);
    for (long r = 0; r < n; ++r) {
      for (int f = 0; f < d; ++f) x(r, f) = 0.5 * static_cast<double>(rng.index(levels));
    }
    std::vector<int> labels(n), targets(n);
    for (long r = 0; r < n; ++r) {
      labels[r] = static_cast<int>(rng.index(3));
      targets[r] = 19 + static_cast<int>(rng.index(12));
    }
    std::vector<double> targets_real(targets.begin(), targets.end());
    std::vector<double> w(n, 1.0);
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<int> features(d);
    std::iota(features.begin(), features.end(), 0);
    const std::string tag = "dataset " + std::to_string(s);

    const auto oc = classification_split_oracle(x, labels, min_leaf);
    const auto sc = best_classification_split(x, labels, w, rows, features, min_leaf);
    if (sc.feature != oc.feature || (oc.feature >= 0 && sc.threshold != oc.threshold)) fail(tag + " gini");
    const auto orr = regression_split_oracle(x, targets, min_leaf);
    const auto sr = best_regression_split(x, targets_real, w, rows, features, min_leaf);
    if (sr.feature != orr.feature || (orr.feature >= 0 && sr.threshold != orr.threshold)) fail(tag + " variance");

    // Depth-1 trees make the same choice unless the root is already pure.
    TreeParams stump;
    stump.max_depth = 1;
    stump.min_samples_leaf = min_leaf;
    const bool labels_pure = std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; });
    const bool targets_pure = std::all_of(targets.begin(), targets.end(), [&](int t) { return t == targets[0]; });
    const auto tc = DecisionTree::fit_classifier(x, labels, w, rows, stump);
    const int want_c = labels_pure ? -1 : oc.feature;
    if (tc.nodes()[0].feature != want_c || (want_c >= 0 && tc.nodes()[0].threshold != oc.threshold)) {
      fail(tag + " classifier stump");
    }
    const auto tr = DecisionTree::fit_regressor(x, targets_real, w, rows, stump);
    const int want_r = targets_pure ? -1 : orr.feature;
    if (tr.nodes()[0].feature != want_r || (want_r >= 0 && tr.nodes()[0].threshold != orr.threshold)) {
      fail(tag + " regressor stump");
    }
    ++result.datasets;
  }
  return result;
}

Dataset blobs(int n, int dim, double separation, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix x(n, dim);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % 3;
    for (int j = 0; j < dim; ++j) x(i, j) = rng.normal();
    x(i, labels[i] % dim) += separation;
  }
  return make_classification(std::move(x), std::move(labels));
}

double gradient_check(std::uint64_t seed, double h) {
  Rng rng(seed);
  const int inputs = 2 + static_cast<int>(rng.index(6));
  std::vector<int> hidden;
  const int depth = 1 + static_cast<int>(rng.index(2));
  for (int i = 0; i < depth; ++i) hidden.push_back(2 + static_cast<int>(rng.index(7)));
  auto layers = nn::init_layers(inputs, hidden, 3, derive_seed(seed, 1));
  // Move away from the initialization so the point is generic.
  for (auto& layer : layers) {
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] += rng.normal(0.0, 0.3);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.normal(0.0, 0.3);
  }
  const int batch = 5;
  Eigen::MatrixXd x(batch, inputs);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  std::vector<int> labels(batch);
  for (auto& l : labels) l = static_cast<int>(rng.index(3));
  const double l2 = 1e-3;

  nn::Gradients grads;
  nn::loss_and_gradients(layers, x, labels, l2, &grads);

  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = nn::loss_and_gradients(layers, x, labels, l2, nullptr);
    param = saved - h;
    const double down = nn::loss_and_gradients(layers, x, labels, l2, nullptr);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max(std::abs(analytic) + std::abs(numeric), 1e-7);
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (Eigen::Index i = 0; i < layers[l].weights.size(); ++i) {
      check(layers[l].weights.data()[i], grads.weights[l].data()[i]);
    }
    for (Eigen::Index i = 0; i < layers[l].bias.size(); ++i) check(layers[l].bias[i], grads.biases[l][i]);
  }
  return worst;
}

namespace {

std::vector<std::string> split_keep(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string mutate(const std::string& seed_text, Rng& rng) {
  static const std::vector<std::string> tokens{"\t", "\n", ",", "0", "-1", "99999999999999999999", "nan", "inf",
                                               "_", "#", "\r", "1e308", "HC", "CTD", "root", " ", "\"", "PUNCT",
                                               std::string(1, '\0'), "\xff\xfe"};
  std::string s = seed_text;
  const int edits = 1 + static_cast<int>(rng.index(6));
  for (int e = 0; e < edits; ++e) {
    const std::size_t pos = s.empty() ? 0 : rng.index(s.size() + 1);
    switch (rng.index(8)) {
      case 0:  // flip a byte
        if (!s.empty()) s[std::min(pos, s.size() - 1)] ^= static_cast<char>(1 + rng.index(255));
        break;
      case 1:  // delete a run
        if (!s.empty()) s.erase(std::min(pos, s.size() - 1), 1 + rng.index(8));
        break;
      case 2:  // insert a token
        s.insert(pos, tokens[rng.index(tokens.size())]);
        break;
      case 3: {  // duplicate a line
        auto lines = split_keep(s);
        if (lines.empty()) break;
        const auto i = rng.index(lines.size());
        lines.insert(lines.begin() + static_cast<long>(rng.index(lines.size() + 1)), lines[i]);
        s.clear();
        for (const auto& l : lines) s += l + "\n";
        break;
      }
      case 4: {  // drop a line
        auto lines = split_keep(s);
        if (lines.empty()) break;
        lines.erase(lines.begin() + static_cast<long>(rng.index(lines.size())));
        s.clear();
        for (const auto& l : lines) s += l + "\n";
        break;
      }
      case 5:  // truncate
        s.resize(pos);
        break;
      case 6: {  // replace a digit run
        const auto d = s.find_first_of("0123456789", pos);
        if (d != std::string::npos) s.replace(d, 1, std::to_string(static_cast<long>(rng.index(40)) - 5));
        break;
      }
      default:  // random garbage
        for (std::size_t k = 0, n = 1 + rng.index(6); k < n; ++k) {
          s.insert(std::min(pos, s.size()), 1, static_cast<char>(rng.index(256)));
        }
    }
  }
  return s;
}

template <typename Parse>
FuzzResult fuzz(const std::vector<std::string>& seeds, int inputs, std::uint64_t seed, Parse parse) {
  Rng rng(seed);
  FuzzResult r;
  for (int i = 0; i < inputs; ++i) {
    const std::string text = mutate(seeds[rng.index(seeds.size())], rng);
    ++r.inputs;
    try {
      parse(text);
      ++r.accepted;
    } catch (const Error&) {
      ++r.typed_errors;
    } catch (const std::exception& e) {
      if (r.untyped_errors++ == 0) r.first_untyped = e.what();
    } catch (...) {
      if (r.untyped_errors++ == 0) r.first_untyped = "non-standard exception";
    }
  }
  return r;
}

}  // namespace

FuzzResult fuzz_transcript_parser(int inputs, std::uint64_t seed) {
  std::vector<std::string> seeds;
  for (const auto& fx : feature_fixtures()) {
    const auto text = read_bytes(fixture_dir() / "transcripts" / fx.file);
    if (!text.empty()) seeds.push_back(text);
  }
  return fuzz(seeds, inputs, seed, [](const std::string& text) {
    const auto t = parse_transcript(text, "P", Task::kCtd, 10.0);
    extract_counts(t);
  });
}

FuzzResult fuzz_manifest_parser(int inputs, std::uint64_t seed) {
  const std::string header(kManifestHeader);
  const std::vector<std::string> seeds{
      header + "\nP1,CTD,t/P1_CTD.conllu,e/P1.emb,60.5,HC,29\nP1,SF,t/P1_SF.conllu,,30,HC,29\n"
               "P1,PF,t/P1_PF.conllu,,31,HC,29\n",
      header + "\nP2,CTD,a.conllu,,12,MCI,\nP3,CTD,b.conllu,b.emb,9.25,AD,19\nP3,PF,c.conllu,,7,AD,19\n",
      header + "\nP4,SF,x.conllu,,1e2,,\n",
  };
  return fuzz(seeds, inputs, seed, [](const std::string& text) {
    const auto m = parse_manifest(text);
    validate_cohort(m, CohortMode::kClassification);
    validate_cohort(m, CohortMode::kRegression);
  });
}

}  // namespace cogmark::test
