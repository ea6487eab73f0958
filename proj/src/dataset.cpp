#include "cogmark/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <zlib.h>

#include "cogmark/error.hpp"
#include "cogmark/types.hpp"

namespace cogmark {

std::uint32_t crc32_bytes(const void* data, std::size_t size, std::uint32_t seed) {
  uLong crc = seed;
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void Dataset::validate() const {
  const std::size_t n = size();
  if (n == 0) throw Error(ErrorCode::kInvalidDataset, "dataset has no rows");
  if (!x.allFinite()) throw Error(ErrorCode::kInvalidDataset, "dataset contains non-finite features");
  if (columns.size() != dim()) throw Error(ErrorCode::kInvalidDataset, "column name count does not match width");
  if (row_ids.size() != n) throw Error(ErrorCode::kInvalidDataset, "row id count does not match rows");
  if (kind == TargetKind::kClassification) {
    if (labels.size() != n) throw Error(ErrorCode::kInvalidDataset, "label count does not match rows");
    for (int y : labels) {
      if (y < 0 || y >= kNumClasses) throw Error(ErrorCode::kInvalidDataset, "class label outside {0,1,2}");
    }
  } else {
    if (targets.size() != n) throw Error(ErrorCode::kInvalidDataset, "target count does not match rows");
    for (double y : targets) {
      if (!(y >= kMmseMin && y <= kMmseMax)) {
        throw Error(ErrorCode::kInvalidDataset, "regression target outside [0, 30]");
      }
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.kind = kind;
  out.columns = columns;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    if (!row_ids.empty()) out.row_ids.push_back(row_ids[rows[i]]);
    if (kind == TargetKind::kClassification) {
      out.labels.push_back(labels[rows[i]]);
    } else {
      out.targets.push_back(targets[rows[i]]);
    }
  }
  return out;
}

std::vector<std::size_t> Dataset::canonical_order() const {
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (row_ids.size() == order.size()) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row_ids[a] < row_ids[b]; });
  }
  return order;
}

std::uint32_t Dataset::fingerprint() const {
  std::uint32_t crc = 0;
  const std::uint64_t shape[3] = {static_cast<std::uint64_t>(x.rows()), static_cast<std::uint64_t>(x.cols()),
                                  static_cast<std::uint64_t>(kind)};
  crc = crc32_bytes(shape, sizeof shape, crc);
  crc = crc32_bytes(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()), crc);
  if (!labels.empty()) crc = crc32_bytes(labels.data(), sizeof(int) * labels.size(), crc);
  if (!targets.empty()) crc = crc32_bytes(targets.data(), sizeof(double) * targets.size(), crc);
  for (const auto& c : columns) crc = crc32_bytes(c.data(), c.size() + 1, crc);
  for (const auto& id : row_ids) crc = crc32_bytes(id.data(), id.size() + 1, crc);
  return crc;
}

namespace {

void fill_defaults(Dataset& d, std::vector<std::string> columns, std::vector<std::string> row_ids) {
  if (columns.empty()) {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) columns.push_back("f" + std::to_string(j));
  }
  if (row_ids.empty()) {
    const std::size_t width = std::to_string(d.x.rows()).size();
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      std::string id = std::to_string(i);
      row_ids.push_back("r" + std::string(width - id.size(), '0') + id);
    }
  }
  d.columns = std::move(columns);
  d.row_ids = std::move(row_ids);
}

}  // namespace

Dataset make_classification(FeatureMatrix x, std::vector<int> labels, std::vector<std::string> columns,
                            std::vector<std::string> row_ids) {
  Dataset d;
  d.kind = TargetKind::kClassification;
  d.x = std::move(x);
  d.labels = std::move(labels);
  fill_defaults(d, std::move(columns), std::move(row_ids));
  d.validate();
  return d;
}

Dataset make_regression(FeatureMatrix x, std::vector<double> targets, std::vector<std::string> columns,
                        std::vector<std::string> row_ids) {
  Dataset d;
  d.kind = TargetKind::kRegression;
  d.x = std::move(x);
  d.targets = std::move(targets);
  fill_defaults(d, std::move(columns), std::move(row_ids));
  d.validate();
  return d;
}

}  // namespace cogmark
