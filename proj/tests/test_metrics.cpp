// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "disfluency/errors.hpp"
#include "disfluency/metrics.hpp"
#include "disfluency/synth.hpp"
#include "metric_cases.hpp"

using namespace disfluency;

TEST(Formulas, HandExamples) {
  for (const auto& c : metric_cases::all()) EXPECT_NEAR(c.compute(), c.expected, 1e-9) << c.name;
}

TEST(Formulas, BadInputsThrow) {
  EXPECT_THROW(speech_rate(10, 5.0, std::vector<double>{2.0, 2.0, 1.0}), MetricError);
  EXPECT_THROW(articulation_rate(10, 0.0), MetricError);
  EXPECT_THROW(phonation_time_ratio(61.0, 60.0), MetricError);
  EXPECT_THROW(phonation_time_ratio(-1.0, 60.0), MetricError);
  EXPECT_THROW(filled_pauses_per_min(1, 0.0), MetricError);
}

TEST(Report, SrExceedsArWithShortPauses) {
  FluencyInputs in{90, 40.0, 30.0, {0.4, 1.2, 0.3}, 2};
  const FluencyReport r = make_report(in);
  EXPECT_GT(r.sr, r.ar);
  EXPECT_GE(r.ptr, 0.0);
  EXPECT_LE(r.ptr, 1.0);
}

TEST(Report, IdenticalReportsHaveZeroDeltas) {
  const FluencyReport r = make_report({50, 20.0, 15.0, {0.3, 0.9}, 1});
  for (const auto& d : compare(r, r)) {
    EXPECT_EQ(d.delta(), 0.0) << d.name;
    EXPECT_FALSE(d.improved()) << d.name;
    EXPECT_TRUE(d.not_worse()) << d.name;
  }
}

TEST(Report, DirectionsFollowTheTable) {
  const auto deltas = compare(FluencyReport{}, FluencyReport{});
  ASSERT_EQ(deltas.size(), 6u);
  const std::vector<std::pair<std::string, bool>> expected{{"SR", true},  {"AR", true},  {"PTR", true},
                                                           {"MLR", true}, {"MLP", false}, {"FPM", false}};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(deltas[i].name, expected[i].first);
    EXPECT_EQ(deltas[i].higher_is_better, expected[i].second);
  }
}

TEST(Report, TextRoundTrip) {
  const FluencyReport r = make_report({77, 10.0, 6.5, {0.31, 0.8, 0.12}, 3});
  const FluencyReport back = parse_report(format_report(r));
  EXPECT_NEAR(back.sr, r.sr, 1e-9);
  EXPECT_NEAR(back.mlp, r.mlp, 1e-9);
  EXPECT_EQ(back.inputs.syllables, 77u);
  EXPECT_EQ(back.inputs.filled_pauses, 3u);
  ASSERT_EQ(back.inputs.pauses.size(), 3u);
  EXPECT_NEAR(back.inputs.pauses[2], 0.12, 1e-9);
}

TEST(Syllables, DigitalSilenceIsZero) {
  const AudioClip clip(std::vector<double>(16000, 0.0), 16000);
  const std::vector<TimeSpan> all{{0.0, 1.0}};
  EXPECT_EQ(count_syllables(clip, all), 0u);
}

TEST(Syllables, TwelveNuclei) {
  LabelTrack layout;
  layout.spans = {{0.0, 0.3, SpanClass::silence_fluent, 0},  {0.3, 1.06, SpanClass::word, 4},
                  {1.06, 1.3, SpanClass::silence_fluent, 0}, {1.3, 1.87, SpanClass::word, 3},
                  {1.87, 2.2, SpanClass::silence_fluent, 0}, {2.2, 2.6, SpanClass::word, 2},
                  {2.6, 2.9, SpanClass::silence_fluent, 0},  {2.9, 3.47, SpanClass::word, 3},
                  {3.47, 3.8, SpanClass::silence_fluent, 0}};
  SynthSpec spec;
  spec.filler_rate = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SynthClip c = render_labels(spec, layout, seed);
    ASSERT_EQ(c.labels.total_syllables(), 12);
    const auto words = c.labels.spans_of(SpanClass::word);
    const auto n = count_syllables(c.audio, words);
    EXPECT_NEAR(static_cast<double>(n), 12.0, 2.0) << seed;
  }
}

TEST(Syllables, GeneratorClips) {
  SynthSpec spec;
  spec.filler_rate = 0;
  spec.clip_len_s = 4.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SynthClip c = generate_clip(spec, seed);
    const auto n = static_cast<int>(count_syllables(c.audio, c.labels.spans_of(SpanClass::word)));
    const int truth = c.labels.total_syllables();
    EXPECT_LE(std::abs(n - truth), std::max(2, truth / 6)) << seed << " truth " << truth;
  }
}

TEST(Syllables, GainInvariant) {
  SynthSpec spec;
  spec.filler_rate = 0;
  spec.clip_len_s = 4.0;
  const SynthClip c = generate_clip(spec, 3);
  std::vector<double> quiet(c.audio.data());
  for (auto& v : quiet) v *= 0.1;
  const auto words = c.labels.spans_of(SpanClass::word);
  EXPECT_EQ(count_syllables(c.audio, words), count_syllables(AudioClip(quiet, 16000), words));
}

TEST(Measure, PhonationComplementsSilence) {
  SynthSpec spec;
  spec.clip_len_s = 6.0;
  const SynthClip c = generate_clip(spec, 8);
  const auto silences = detect_silences(c.audio);
  const FluencyReport r = measure(c.audio, 0, &silences);
  double quiet = 0.0;
  for (const auto& s : silences) quiet += s.duration_s();
  EXPECT_NEAR(r.ptr + quiet / c.audio.duration_s(), 1.0, 1e-9);
  EXPECT_EQ(r.inputs.pauses.size(), silences.size());
}

TEST(Measure, ResampledAudioAgrees) {
  SynthSpec spec;
  spec.clip_len_s = 6.0;
  spec.filler_rate = 0;
  const SynthClip c = generate_clip(spec, 9);
  const FluencyReport a = measure(c.audio, 0);
  const FluencyReport b = measure(resample(resample(c.audio, 22050), 16000), 0);
  EXPECT_NEAR(static_cast<double>(a.inputs.syllables), static_cast<double>(b.inputs.syllables), 2.0);
}
