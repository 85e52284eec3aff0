// SPDX-License-Identifier: Apache-2.0
#include "disfluency/crnn/detect.hpp"

#include <algorithm>

#include "disfluency/errors.hpp"

namespace disfluency {

std::vector<TimeSpan> complement(const std::vector<TimeSpan>& spans, double total_s) {
  std::vector<TimeSpan> out;
  double cursor = 0.0;
  for (const auto& s : spans) {
    if (s.start_s > cursor) out.push_back({cursor, std::min(s.start_s, total_s)});
    cursor = std::max(cursor, s.end_s);
    if (cursor >= total_s) break;
  }
  if (cursor < total_s) out.push_back({cursor, total_s});
  return out;
}

}  // namespace disfluency

namespace disfluency::crnn {

FrameScores evaluate_frames(const FrameLabels& predicted, const FrameLabels& reference) {
  if (predicted.size() != reference.size()) throw ShapeError("frame tracks differ in length");
  FrameScores s;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const bool p = predicted.classes[t] == kFiller;
    const bool r = reference.classes[t] == kFiller;
    if (p && r) ++s.true_pos;
    else if (p) ++s.false_pos;
    else if (r) ++s.false_neg;
  }
  const std::size_t n_pred = s.true_pos + s.false_pos;
  const std::size_t n_ref = s.true_pos + s.false_neg;
  if (n_pred == 0 && n_ref == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = n_pred ? static_cast<double>(s.true_pos) / n_pred : 0.0;
  s.recall = n_ref ? static_cast<double>(s.true_pos) / n_ref : 0.0;
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

FrameLabels argmax_frames(const Matrix& probs) {
  FrameLabels out;
  out.classes.resize(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index t = 0; t < probs.cols(); ++t) {
    Eigen::Index k = 0;
    probs.col(t).maxCoeff(&k);
    out.classes[static_cast<std::size_t>(t)] = static_cast<int>(k);
  }
  return out;
}

FrameLabels predict_frames(const CrnnModel& model, const FeatureMatrix& feats) {
  return argmax_frames(forward(model, feats));
}

FrameLabels median_filter(const FrameLabels& labels, int width) {
  if (width < 1 || width % 2 == 0) throw ShapeError("median width must be odd and positive");
  const auto n = static_cast<std::ptrdiff_t>(labels.size());
  const std::ptrdiff_t half = width / 2;
  FrameLabels out;
  out.classes.resize(labels.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, t + half);
    std::ptrdiff_t ones = 0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) ones += labels.classes[static_cast<std::size_t>(i)] == kFiller;
    const std::ptrdiff_t len = hi - lo + 1;
    // Ties (even windows at the edges) keep the centre frame.
    int v;
    if (2 * ones > len) v = kFiller;
    else if (2 * ones < len) v = kNonFiller;
    else v = labels.classes[static_cast<std::size_t>(t)];
    out.classes[static_cast<std::size_t>(t)] = v;
  }
  return out;
}

namespace {

struct Run {
  std::size_t first;
  std::size_t last;
};

std::vector<Run> runs_of(const FrameLabels& labels, int cls) {
  std::vector<Run> runs;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels.classes[t] != cls) continue;
    if (!runs.empty() && runs.back().last + 1 == t) runs.back().last = t;
    else runs.push_back({t, t});
  }
  return runs;
}

TimeSpan run_span(const Run& r, double hop_s, double origin_s) {
  return {std::max(0.0, origin_s + (static_cast<double>(r.first) - 0.5) * hop_s),
          origin_s + (static_cast<double>(r.last) + 0.5) * hop_s};
}

}  // namespace

std::vector<TimeSpan> spans_from_frames(const FrameLabels& labels, double hop_s, double origin_s, int cls) {
  std::vector<TimeSpan> out;
  for (const auto& r : runs_of(labels, cls)) out.push_back(run_span(r, hop_s, origin_s));
  return out;
}

std::vector<TimeSpan> filler_spans(const FrameLabels& raw, double hop_s, double origin_s, const PostProcess& pp) {
  const FrameLabels smooth = median_filter(raw, pp.median_width);
  std::vector<Run> merged;
  for (const auto& r : runs_of(smooth, kFiller)) {
    if (!merged.empty() && r.first - merged.back().last - 1 < static_cast<std::size_t>(pp.merge_gap_frames)) {
      merged.back().last = r.last;
    } else {
      merged.push_back(r);
    }
  }
  std::vector<TimeSpan> out;
  for (const auto& r : merged) {
    const TimeSpan s = run_span(r, hop_s, origin_s);
    if (static_cast<double>(r.last - r.first + 1) * hop_s >= pp.min_span_s - 1e-9) out.push_back(s);
  }
  return out;
}

std::vector<TimeSpan> predict_filler_spans(const CrnnModel& model, const AudioClip& clip, const PostProcess& pp) {
  const FeatureMatrix feats = extract(clip, model.arch.input_kind);
  std::vector<TimeSpan> spans = filler_spans(predict_frames(model, feats), feats.hop_s, feats.origin_s, pp);
  for (auto& s : spans) s.end_s = std::min(s.end_s, clip.duration_s());
  return spans;
}

}  // namespace disfluency::crnn
