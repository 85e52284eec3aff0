// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <span>
#include <vector>

#include "disfluency/audio.hpp"
#include "disfluency/crnn/detect.hpp"
#include "disfluency/crnn/model.hpp"
#include "disfluency/crnn/train.hpp"
#include "disfluency/metrics.hpp"
#include "disfluency/repair.hpp"
#include "disfluency/silence.hpp"
#include "disfluency/synth.hpp"

namespace disfluency {

struct Models {
  crnn::CrnnModel crnn;
  SilenceClassifier silence;
};

struct RepairConfig {
  double window_s = kDefaultContextS;
  FillMode fill = FillMode::noise_floor;
  double bin_width_s = kHistogramBinS;
  /// Target used when a clip has no fluent silence to build a histogram.
  double fallback_target_s = 0.225;
  /// Later passes only retime disfluent silences further than this from
  /// the target.
  double target_tolerance_s = 0.010;
  int max_passes = 4;
  MaskPadding padding;
  crnn::PostProcess post;
};

/// Classifier decisions for silences of `clip`.
std::vector<ClassifiedSilence> classify_silences(const AudioClip& clip, std::span<const SilenceSpan> silences,
                                                 const SilenceClassifier& clf, double window_s);

struct RepairPass {
  std::vector<TimeSpan> fillers;              // detected on the pass input
  std::vector<TimeSpan> masks;                // fillers after padding
  std::vector<ClassifiedSilence> silences;    // on the masked pass input
  RepairPlan plan;                            // in pass-input coordinates
};

struct RepairResult {
  AudioClip output;
  std::vector<RepairPass> passes;  // the last pass has an empty plan when converged
  std::optional<SilenceHistogram> histogram;
  double target_s = 0.0;
  bool fallback_target = false;
  bool converged = false;
  NoiseFloor noise_floor;
  ApplyTrace trace;  // output sample -> source sample, -1 when synthesized
  FluencyReport before;
  FluencyReport after;
  std::vector<SilenceSpan> output_silences;

  /// Edits of every pass that changed the clip.
  std::vector<RepairPlan> plans() const;
};

/// Detect fillers, mask them, re-segment silences on the masked clip,
/// classify them, take the target from the fluent-silence histogram and
/// retime the disfluent ones. Passes repeat on the output with the same
/// target until no filler is detected and no disfluent silence is off
/// target, or max_passes is reached.
RepairResult repair_clip(const AudioClip& clip, const Models& models, const RepairConfig& cfg = {});

/// Applies plans from a plan file in order.
AudioClip replay_plans(const AudioClip& clip, std::span<const RepairPlan> plans);

/// Features of the model's kind with projected ground-truth frame labels.
crnn::TrainingExample make_detector_example(const AudioClip& clip, const LabelTrack& labels, FeatureKind kind);

/// Ground-truth fillers are masked as the repair pipeline would mask them,
/// silences are detected on the result and labelled with heuristic_label
/// (flagged when a silence touches a masked filler).
std::vector<LabeledFeature> make_silence_examples(const AudioClip& clip, const LabelTrack& labels,
                                                  double window_s = kDefaultContextS,
                                                  FillMode fill = FillMode::noise_floor);

struct Corpus {
  std::vector<std::string> ids;
  std::vector<AudioClip> clips;
  std::vector<LabelTrack> labels;  // empty when loaded without labels
};

/// Reads every clip (resampled to 16 kHz) and, when required, its labels.
/// Missing labels throw ParseError.
Corpus load_corpus(const Manifest& manifest, bool require_labels, unsigned workers = 0);

struct TrainOptions {
  FeatureKind features = FeatureKind::mfcc;
  crnn::TrainConfig crnn;
  ClassifierKind classifier = ClassifierKind::logreg;
  ClassifierParams classifier_params = ClassifierParams::defaults(ClassifierKind::logreg);
  double window_s = kDefaultContextS;
  unsigned workers = 0;
};

struct TrainOutcome {
  Models models;
  std::vector<crnn::EpochStats> history;
  int best_epoch = 0;
  std::size_t silence_examples = 0;
};

TrainOutcome train_models(const Corpus& corpus, const TrainOptions& opts, const crnn::EpochCallback& on_epoch = {});

/// Pooled frame-level filler scores of the detector over a labelled corpus.
crnn::FrameScores evaluate_detector(const crnn::CrnnModel& model, const Corpus& corpus, unsigned workers = 0);

}  // namespace disfluency
