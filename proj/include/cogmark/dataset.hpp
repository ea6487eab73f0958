#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cogmark {

using FeatureMatrix = Eigen::MatrixXd;  // rows = samples

enum class TargetKind : std::uint8_t { kClassification = 0, kRegression = 1 };

struct Dataset {
  FeatureMatrix x;
  TargetKind kind = TargetKind::kClassification;
  std::vector<int> labels;      // classification: 0 = HC, 1 = MCI, 2 = AD
  std::vector<double> targets;  // regression: MMSE
  std::vector<std::string> columns;
  std::vector<std::string> row_ids;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }

  // Throws InvalidDataset on any broken invariant.
  void validate() const;

  Dataset subset(const std::vector<std::size_t>& rows) const;

  // Row order sorted by id (stable), the canonical order every learner fits in.
  std::vector<std::size_t> canonical_order() const;

  std::uint32_t fingerprint() const;
};

Dataset make_classification(FeatureMatrix x, std::vector<int> labels, std::vector<std::string> columns = {},
                             std::vector<std::string> row_ids = {});
Dataset make_regression(FeatureMatrix x, std::vector<double> targets, std::vector<std::string> columns = {},
                        std::vector<std::string> row_ids = {});

// zlib CRC32 over raw bytes, chained through `seed`.
std::uint32_t crc32_bytes(const void* data, std::size_t size, std::uint32_t seed = 0);

}  // namespace cogmark
