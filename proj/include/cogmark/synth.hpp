#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "cogmark/learners.hpp"
#include "cogmark/transcript.hpp"

namespace cogmark {

struct CohortSpec {
  std::array<int, 3> train_counts{61, 44, 12};  // HC, MCI, AD
  std::array<int, 3> dev_counts{21, 15, 4};
  double mmse_fraction = 69.0 / 157.0;
  std::size_t embedding_dim = 1280;
  int informative_dims = 16;  // per-class block of shifted embedding dims
  // Class effects, in units of within-class spread. 0 makes classes
  // indistinguishable in both transcripts and embeddings.
  double separation = 1.0;
  std::array<double, 3> mmse_means{28.5, 26.5, 22.0};
  double mmse_sd = 1.5;
  std::array<int, 2> mmse_range{19, 30};
  std::array<int, 2> frames{4, 12};
  bool binary_embeddings = true;
  std::uint64_t seed = 0;

  void validate() const;
};

Json to_json(const CohortSpec& spec);
CohortSpec cohort_spec_from_json(const Json& j);  // unknown keys rejected

struct GeneratedCohort {
  CohortManifest train;
  CohortManifest dev;
  CohortManifest all;
};

// Writes transcripts/, embeddings/, train.csv, dev.csv, manifest.csv and
// cohort_spec.json under out_dir.
GeneratedCohort gen_cohort(const CohortSpec& spec, const std::filesystem::path& out_dir, unsigned jobs = 1);

// Mean of the class-conditional embedding distribution.
Eigen::VectorXd class_embedding_mean(const CohortSpec& spec, Diagnosis d);

struct RegressionSignal {
  double intercept = 26.0;
  std::vector<double> coefficients;  // per standardized 42-feature column
  double noise_sigma = 1.5;
};

// A few nonzero terms of moderate size.
RegressionSignal default_regression_signal();

struct RegressionCohort {
  GeneratedCohort cohort;
  Json ground_truth;
};

// gen_cohort, then MMSE = clamp(round(intercept + c . z + noise)) for the
// participants chosen to carry MMSE, where z is the standardized 42-feature
// vector. Writes ground_truth.json next to the manifests.
RegressionCohort gen_regression_signal(const CohortSpec& spec, const RegressionSignal& signal,
                                       const std::filesystem::path& out_dir, unsigned jobs = 1);

}  // namespace cogmark
