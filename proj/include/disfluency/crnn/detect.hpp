// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "disfluency/audio.hpp"
#include "disfluency/crnn/model.hpp"
#include "disfluency/frame_labels.hpp"
#include "disfluency/time_span.hpp"

namespace disfluency::crnn {

struct FrameScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_pos = 0;
  std::size_t false_pos = 0;
  std::size_t false_neg = 0;
};

/// Filler-class precision / recall / F1 over aligned frame tracks. When
/// neither track has a filler frame every score is 1; when only one has, 0.
FrameScores evaluate_frames(const FrameLabels& predicted, const FrameLabels& reference);

/// Column-wise argmax of a K x T probability matrix.
FrameLabels argmax_frames(const Matrix& probs);

FrameLabels predict_frames(const CrnnModel& model, const FeatureMatrix& feats);

struct PostProcess {
  int median_width = 5;       // odd, frames
  int merge_gap_frames = 3;   // gaps shorter than this are closed
  double min_span_s = 0.09;   // shorter spans are dropped
};

/// Sliding median over a binary track; the window shrinks at the edges.
FrameLabels median_filter(const FrameLabels& labels, int width);

/// Each run [a, b] of `cls` frames becomes
/// [origin + (a - 0.5) hop, origin + (b + 0.5) hop], clamped at 0.
std::vector<TimeSpan> spans_from_frames(const FrameLabels& labels, double hop_s, double origin_s,
                                        int cls = kFiller);

/// Median filter, gap closing and minimum-length pruning of a raw track.
std::vector<TimeSpan> filler_spans(const FrameLabels& raw, double hop_s, double origin_s,
                                   const PostProcess& pp = {});

/// Features of the model's kind, frame predictions and post-processing.
std::vector<TimeSpan> predict_filler_spans(const CrnnModel& model, const AudioClip& clip,
                                           const PostProcess& pp = {});

}  // namespace disfluency::crnn
