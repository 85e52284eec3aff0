// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace disfluency {

/// Half-open time interval in seconds.
struct TimeSpan {
  double start_s = 0.0;
  double end_s = 0.0;

  double duration_s() const { return end_s - start_s; }
  bool overlaps(const TimeSpan& o) const { return start_s < o.end_s && o.start_s < end_s; }
  double overlap_s(const TimeSpan& o) const;
  bool operator==(const TimeSpan&) const = default;
};

inline double TimeSpan::overlap_s(const TimeSpan& o) const {
  const double lo = start_s > o.start_s ? start_s : o.start_s;
  const double hi = end_s < o.end_s ? end_s : o.end_s;
  return hi > lo ? hi - lo : 0.0;
}

/// Intersection over union of two spans (0 when both are empty).
inline double iou(const TimeSpan& a, const TimeSpan& b) {
  const double inter = a.overlap_s(b);
  const double uni = a.duration_s() + b.duration_s() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Complement of sorted, disjoint spans within [0, total_s].
std::vector<TimeSpan> complement(const std::vector<TimeSpan>& spans, double total_s);

}  // namespace disfluency
