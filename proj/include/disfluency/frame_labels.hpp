// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "disfluency/features.hpp"

namespace disfluency {

inline constexpr int kNonFiller = 0;
inline constexpr int kFiller = 1;

/// Per-frame class track aligned to a FeatureMatrix (one class per frame).
struct FrameLabels {
  std::vector<int> classes;

  std::size_t size() const { return classes.size(); }
  /// K x T indicator matrix.
  RowMatrix one_hot(int num_classes = 2) const;
  std::size_t count(int cls) const;
};

}  // namespace disfluency
