#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cogmark/features.hpp"
#include "cogmark/learners.hpp"
#include "cogmark/tree.hpp"

namespace cogmark::test {

std::filesystem::path fixture_dir();

// Fresh empty directory under the system temp dir, removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_bytes(const std::filesystem::path& path);

// Hand-annotated transcripts with hand-counted values.
struct FeatureFixture {
  std::string file;
  double duration = 0.0;
  LinguisticCounts counts;
  std::array<double, kTaskFeatureCount> features{};
};

const std::vector<FeatureFixture>& feature_fixtures();

// Max |actual - expected| over the fixture's 14 features, after parsing and
// counting with default rules.
double feature_fixture_error(const FeatureFixture& fx, LinguisticCounts* counts_out = nullptr);

// Brute-force metric oracles. Rational values are compared through their
// correctly rounded double.
struct MetricOracle {
  double macro_precision;
  double macro_recall;
  double macro_f1;
};

MetricOracle macro_metric_oracle(std::span<const int> y_true, std::span<const int> y_pred);
double rmse_oracle(std::span<const double> y_true, std::span<const double> y_pred);

// Returns the number of random sets whose metrics disagreed with the oracle.
int metric_oracle_mismatches(int sets, std::uint64_t seed, std::string* first_failure = nullptr);

// Exhaustive enumeration of midpoint thresholds with exact rational impurity.
struct SplitOracle {
  int feature = -1;
  double threshold = 0.0;
};

SplitOracle classification_split_oracle(const FeatureMatrix& x, std::span<const int> labels, int min_samples_leaf);
SplitOracle regression_split_oracle(const FeatureMatrix& x, std::span<const int> targets, int min_samples_leaf);

struct SplitSuiteResult {
  int datasets = 0;
  int mismatches = 0;
  std::string first_failure;
};

// Random small datasets (N <= 30, D <= 3) with many tied values; every case
// compares best_*_split and a depth-1 tree against the oracle.
SplitSuiteResult run_split_suite(int datasets, std::uint64_t seed);

// Three Gaussian classes with unit spread; class c is shifted by `separation`
// along dimension c mod D. Labels cycle 0, 1, 2.
Dataset blobs(int n, int dim, double separation, std::uint64_t seed);

// Max relative error between analytic and central-difference gradients.
double gradient_check(std::uint64_t seed, double h = 1e-5);

struct FuzzResult {
  int inputs = 0;
  int accepted = 0;
  int typed_errors = 0;
  int untyped_errors = 0;  // anything thrown that is not cogmark::Error
  std::string first_untyped;
};

// Byte- and line-level mutations of valid seed documents.
FuzzResult fuzz_transcript_parser(int inputs, std::uint64_t seed);
FuzzResult fuzz_manifest_parser(int inputs, std::uint64_t seed);

}  // namespace cogmark::test
