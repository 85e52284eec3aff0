// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "disfluency/errors.hpp"
#include "disfluency/rng.hpp"
#include "disfluency/silence.hpp"

using namespace disfluency;

namespace {

std::vector<double> tone(double hz, double seconds, double amp = 0.3) {
  std::vector<double> x(static_cast<std::size_t>(std::lround(seconds * 16000)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2 * M_PI * hz * i / 16000.0);
  return x;
}

AudioClip concat(std::initializer_list<std::vector<double>> parts, double noise = 0.0, std::uint64_t seed = 1) {
  std::vector<double> x;
  for (const auto& p : parts) x.insert(x.end(), p.begin(), p.end());
  Rng rng(seed);
  if (noise > 0) for (auto& s : x) s += noise * rng.normal();
  return AudioClip(x, 16000);
}

std::vector<LabeledFeature> toy_set(int n, std::uint64_t seed, bool flip = false) {
  Rng rng(seed);
  std::vector<LabeledFeature> out;
  for (int i = 0; i < n; ++i) {
    LabeledFeature ex;
    const bool dis = i % 2 == 0;
    for (int k = 0; k < kSilenceFeatureLen; ++k) ex.feature.values(k) = 0.3 * rng.normal() + (dis ? 1.0 : 0.0);
    ex.label = (dis != flip) ? SilenceLabel::disfluent : SilenceLabel::fluent;
    out.push_back(ex);
  }
  return out;
}

}  // namespace

TEST(Energy, FrameDb) {
  const auto db = frame_energy_db(AudioClip(std::vector<double>(4800, 0.5), 16000));
  ASSERT_EQ(db.size(), 19u);
  for (double v : db) EXPECT_NEAR(v, 20 * std::log10(0.5 + 1e-10), 1e-9);
}

TEST(Threshold, FloorMarginAbsoluteAndContrast) {
  std::vector<double> db(100, -60.0);
  for (int i = 50; i < 100; ++i) db[i] = -10.0;
  EXPECT_DOUBLE_EQ(silence_threshold_db(db), -45.0);        // floor + 6 below the absolute floor
  std::fill(db.begin(), db.begin() + 50, -40.0);
  EXPECT_DOUBLE_EQ(silence_threshold_db(db), -34.0);        // floor + 6
  std::fill(db.begin(), db.end(), -20.0);
  EXPECT_DOUBLE_EQ(silence_threshold_db(db), -40.0);        // capped at peak - 20
}

TEST(Detect, DigitalSilenceIsOneSpan) {
  const auto spans = detect_silences(AudioClip(std::vector<double>(32000, 0.0), 16000));
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_DOUBLE_EQ(spans[0].start_s, 0.0);
  EXPECT_DOUBLE_EQ(spans[0].end_s, 2.0);
}

TEST(Detect, ToneGapTone) {
  const AudioClip clip = concat({tone(440, 1.0), std::vector<double>(8000, 0.0), tone(440, 1.0)}, 1e-4);
  const auto spans = detect_silences(clip);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_NEAR(spans[0].start_s, 1.0, 0.030);
  EXPECT_NEAR(spans[0].end_s, 1.5, 0.030);
}

TEST(Detect, SteadyToneHasNoSilence) {
  EXPECT_TRUE(detect_silences(concat({tone(300, 2.0)}, 1e-3)).empty());
}

TEST(Detect, ShortGapsAreIgnored) {
  const AudioClip clip = concat({tone(440, 0.5), std::vector<double>(800, 0.0), tone(440, 0.5)}, 1e-4);
  EXPECT_TRUE(detect_silences(clip).empty());
}

TEST(Detect, SortedDisjointInsideClip) {
  const AudioClip clip = concat({tone(220, 0.4), std::vector<double>(4000, 0.0), tone(330, 0.3),
                                 std::vector<double>(12000, 0.0), tone(440, 0.6), std::vector<double>(2400, 0.0)},
                                1e-4, 5);
  const auto spans = detect_silences(clip);
  ASSERT_EQ(spans.size(), 3u);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    EXPECT_LT(spans[i].start_s, spans[i].end_s);
    EXPECT_GE(spans[i].start_s, 0.0);
    EXPECT_LE(spans[i].end_s, clip.duration_s());
    if (i) {
      EXPECT_GT(spans[i].start_s, spans[i - 1].end_s);
    }
  }
  EXPECT_NEAR(spans[1].duration_s(), 0.75, 0.03);
}

TEST(Heuristic, DurationAndSegmentRules) {
  EXPECT_EQ(heuristic_label({1.0, 1.8}, false), SilenceLabel::disfluent);
  EXPECT_EQ(heuristic_label({1.0, 1.15}, false), SilenceLabel::fluent);
  EXPECT_EQ(heuristic_label({1.0, 1.4}, true), SilenceLabel::disfluent);
  EXPECT_EQ(heuristic_label({1.0, 1.4}, false), SilenceLabel::fluent);
  EXPECT_EQ(heuristic_label({1.0, 1.7}, false), SilenceLabel::fluent);
}

TEST(Feature, ContextLengthAndTruncation) {
  const AudioClip clip = concat({tone(200, 5.0)}, 1e-3);
  const SilenceFeature f = build_feature(clip, {2.0, 2.5}, 0.9);
  // (2.3 * 16000 - 480) / 240 + 1 = 152 frames, first 128 kept.
  EXPECT_EQ(f.true_len, 128);
  EXPECT_EQ(f.values.size(), kSilenceFeatureLen);
}

TEST(Feature, ClampedAtClipStart) {
  const AudioClip clip = concat({tone(200, 5.0)}, 1e-3);
  const SilenceFeature f = build_feature(clip, {0.0, 0.5}, 0.9);
  EXPECT_EQ(f.values.size(), kSilenceFeatureLen);
  EXPECT_EQ(f.true_len, static_cast<int>((1.4 * 16000 - 480) / 240 + 1));
  for (int k = f.true_len; k < kSilenceFeatureLen; ++k) EXPECT_EQ(f.values(k), 0.0);
}

TEST(Feature, PureSilenceIsFlatThenZero) {
  const AudioClip clip(std::vector<double>(16000, 0.0), 16000);
  const SilenceFeature f = build_feature(clip, {0.3, 0.5}, 0.8);
  const double expected = std::sqrt(1.0 / 128) * 128 * std::log(1e-10) / 40;
  ASSERT_GT(f.true_len, 0);
  ASSERT_LT(f.true_len, kSilenceFeatureLen);
  for (int k = 0; k < f.true_len; ++k) EXPECT_NEAR(f.values(k), expected, 1e-9);
  for (int k = f.true_len; k < kSilenceFeatureLen; ++k) EXPECT_EQ(f.values(k), 0.0);
}

TEST(Feature, WindowOutsideRangeRejected) {
  const AudioClip clip(std::vector<double>(16000, 0.0), 16000);
  EXPECT_THROW(build_feature(clip, {0.3, 0.5}, 0.5), SpecError);
  EXPECT_THROW(build_feature(clip, {0.3, 0.5}, 1.2), SpecError);
}

TEST(Classifier, SeparableToySetIsFitExactly) {
  const auto data = toy_set(80, 3);
  for (auto kind : {ClassifierKind::logreg, ClassifierKind::linear_svm}) {
    const SilenceClassifier clf = train_classifier(data, kind);
    for (const auto& ex : data) EXPECT_EQ(classify(clf, ex.feature).label, ex.label);
  }
}

TEST(Classifier, FlippedLabelsNegateWeights) {
  const SilenceClassifier a = train_classifier(toy_set(60, 4), ClassifierKind::logreg);
  const SilenceClassifier b = train_classifier(toy_set(60, 4, true), ClassifierKind::logreg);
  EXPECT_LT((a.weights + b.weights).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(a.bias, -b.bias, 1e-6);
}

TEST(Classifier, ZeroModelTiesToDisfluent) {
  const SilenceClassifier clf;
  const SilenceDecision d = classify(clf, SilenceFeature{});
  EXPECT_EQ(d.score, 0.5);
  EXPECT_EQ(d.label, SilenceLabel::disfluent);
}

TEST(Classifier, ScoreMonotoneInPositiveWeights) {
  SilenceClassifier clf = train_classifier(toy_set(40, 5), ClassifierKind::logreg);
  SilenceFeature f;
  f.values.setConstant(0.5);
  double prev = classify(clf, f).score;
  for (int k = 0; k < kSilenceFeatureLen; ++k) {
    if (clf.weights(k) <= 0) continue;
    f.values(k) += 0.5;
    const double s = classify(clf, f).score;
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(Classifier, DegenerateAndEmptyData) {
  std::vector<LabeledFeature> none;
  EXPECT_THROW(train_classifier(none, ClassifierKind::logreg), EmptyDataset);
  auto one_class = toy_set(10, 6);
  for (auto& e : one_class) e.label = SilenceLabel::fluent;
  EXPECT_THROW(train_classifier(one_class, ClassifierKind::logreg), DegenerateDataset);
}

TEST(Classifier, ScoresByHand) {
  using L = SilenceLabel;
  const std::vector<L> pred{L::disfluent, L::disfluent, L::fluent, L::fluent, L::disfluent};
  const std::vector<L> ref{L::disfluent, L::fluent, L::disfluent, L::fluent, L::disfluent};
  const ClassificationScores s = score_labels(pred, ref);
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3);
  EXPECT_DOUBLE_EQ(s.accuracy, 0.6);
}

TEST(Classifier, CrossValidationOnToySet) {
  const ClassificationScores s = cross_validate(toy_set(100, 7), ClassifierKind::logreg,
                                                ClassifierParams::defaults(ClassifierKind::logreg), 10, 3);
  EXPECT_EQ(s.count, 100u);
  EXPECT_GE(s.f1, 0.99);
}

TEST(Classifier, CheckpointRoundTrip) {
  const SilenceClassifier clf = train_classifier(toy_set(30, 8), ClassifierKind::linear_svm);
  const auto path = std::filesystem::temp_directory_path() / "disfluency_clf.ckpt";
  save_classifier(clf, path);
  const SilenceClassifier back = load_classifier(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.kind, clf.kind);
  EXPECT_EQ(back.weights, clf.weights);
  EXPECT_EQ(back.bias, clf.bias);
  EXPECT_EQ(back.params.iterations, clf.params.iterations);
  EXPECT_EQ(classifier_kind_from_string(to_string(ClassifierKind::linear_svm)), ClassifierKind::linear_svm);
}
