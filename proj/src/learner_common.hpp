#pragma once

#include <vector>

#include "cogmark/dataset.hpp"
#include "cogmark/learners.hpp"

namespace cogmark::detail {

// Dataset rows rearranged into canonical (id-sorted) order.
struct CanonicalData {
  FeatureMatrix x;
  std::vector<int> labels;
  std::vector<double> targets;
};

CanonicalData canonicalize(const Dataset& d);

TrainingMetadata make_metadata(const Dataset& d, std::uint64_t seed);

}  // namespace cogmark::detail
