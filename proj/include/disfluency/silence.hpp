// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "disfluency/audio.hpp"
#include "disfluency/time_span.hpp"

namespace disfluency {

inline constexpr double kDisfluentPauseS = 0.7;
inline constexpr double kMicroPauseS = 0.2;
inline constexpr int kSilenceFeatureLen = 128;
inline constexpr double kDefaultContextS = 0.9;

struct SilenceSpan {
  double start_s = 0.0;
  double end_s = 0.0;
  double context_window_s = kDefaultContextS;

  double duration_s() const { return end_s - start_s; }
  TimeSpan span() const { return {start_s, end_s}; }
};

enum class SilenceLabel { fluent = 0, disfluent = 1 };
std::string_view to_string(SilenceLabel l);

struct SilenceDetectorConfig {
  double floor_percentile = 10.0;
  double floor_margin_db = 6.0;
  double absolute_floor_dbfs = -45.0;
  /// The threshold never rises above the loudest frame minus this; a clip
  /// with no dynamic range has no silence.
  double min_contrast_db = 20.0;
  double min_silence_s = 0.100;
  double merge_gap_s = 0.030;
  /// Width of the sliding RMS used to place span edges at sample resolution.
  double edge_window_s = 0.010;
};

/// Unwindowed RMS of each analysis frame in dBFS (20 log10(rms + 1e-10)).
std::vector<double> frame_energy_db(const AudioClip& clip);

/// Threshold the detector applies to frame_energy_db(clip).
double silence_threshold_db(std::span<const double> energy_db, const SilenceDetectorConfig& cfg = {});

/// Sorted, disjoint spans within the clip. Runs of quiet frames give coarse
/// spans whose edges are then moved to where a 10 ms sliding RMS crosses the
/// threshold; gaps below merge_gap_s are closed and spans shorter than
/// min_silence_s dropped. Exact digital zero is always quiet.
std::vector<SilenceSpan> detect_silences(const AudioClip& clip, const SilenceDetectorConfig& cfg = {});

/// Disfluent when flagged or longer than 0.7 s, fluent otherwise.
SilenceLabel heuristic_label(const SilenceSpan& span, bool inside_disfluent_segment);

struct SilenceFeature {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(kSilenceFeatureLen);
  int true_len = 0;
};

/// Mean-over-coefficients MFCC of [start - w, end + w] (clamped), first 128
/// frames kept, the rest zero. window_s must lie in [0.8, 1.0].
SilenceFeature build_feature(const AudioClip& clip, const SilenceSpan& span, double window_s = kDefaultContextS);

enum class ClassifierKind { logreg = 0, linear_svm = 1 };
std::string_view to_string(ClassifierKind k);
ClassifierKind classifier_kind_from_string(std::string_view s);

struct ClassifierParams {
  double c = 10.0;
  int iterations = 100;
  static ClassifierParams defaults(ClassifierKind kind);
};

struct SilenceClassifier {
  static constexpr std::uint32_t kFormatVersion = 1;

  ClassifierKind kind = ClassifierKind::logreg;
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(kSilenceFeatureLen);
  double bias = 0.0;
  ClassifierParams params;
  double window_s = kDefaultContextS;
};

struct LabeledFeature {
  SilenceFeature feature;
  SilenceLabel label = SilenceLabel::fluent;
};

/// logreg: mean log-loss + ||w||^2 / (2 C n), full-batch gradient descent
/// with step 1/L on standardized inputs, zero start. svm: mean hinge loss
/// with the same penalty, subgradient steps eta0 / sqrt(k), best iterate
/// kept. Standardization is folded back into the returned weights.
SilenceClassifier train_classifier(std::span<const LabeledFeature> data, ClassifierKind kind,
                                   const ClassifierParams& params);
SilenceClassifier train_classifier(std::span<const LabeledFeature> data, ClassifierKind kind);

struct SilenceDecision {
  SilenceLabel label = SilenceLabel::fluent;
  double score = 0.5;  // sigmoid(w.x + b)
};

/// Disfluent iff score >= 0.5.
SilenceDecision classify(const SilenceClassifier& clf, const SilenceFeature& f);

struct ClassificationScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

/// Disfluent-class scores of predictions against references.
ClassificationScores score_labels(std::span<const SilenceLabel> predicted, std::span<const SilenceLabel> reference);

/// k-fold cross-validation with a seeded shuffle; predictions of all folds
/// are pooled before scoring.
ClassificationScores cross_validate(std::span<const LabeledFeature> data, ClassifierKind kind,
                                    const ClassifierParams& params, int folds = 10, std::uint64_t seed = 1);

void save_classifier(const SilenceClassifier& clf, const std::filesystem::path& path);
SilenceClassifier load_classifier(const std::filesystem::path& path);

}  // namespace disfluency
