// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disfluency/audio.hpp"
#include "disfluency/silence.hpp"
#include "disfluency/time_span.hpp"

namespace disfluency {

inline constexpr double kArticulationPauseS = 3.0;
inline constexpr double kRunPauseS = 0.25;
inline constexpr double kCountedPauseS = 0.2;

struct FluencyInputs {
  std::size_t syllables = 0;
  double total_time_s = 0.0;
  double speaking_time_s = 0.0;
  std::vector<double> pauses;  // unfilled pause durations, seconds
  std::size_t filled_pauses = 0;
};

struct FluencyReport {
  double sr = 0.0;   // syllables per minute, short pauses excluded
  double ar = 0.0;   // syllables per minute of total time
  double ptr = 0.0;  // speaking / total
  double mlr = 0.0;  // syllables per run between pauses > 0.25 s
  double mlp = 0.0;  // mean pause > 0.2 s, seconds
  double fpm = 0.0;  // filled pauses per minute
  FluencyInputs inputs;
};

/// syllables / (total - sum of pauses < 3 s) * 60.
double speech_rate(std::size_t syllables, double total_time_s, std::span<const double> pauses);
/// syllables / total * 60.
double articulation_rate(std::size_t syllables, double total_time_s);
double phonation_time_ratio(double speaking_time_s, double total_time_s);
/// syllables / (number of pauses > 0.25 s + 1).
double mean_length_runs(std::size_t syllables, std::span<const double> pauses);
/// Mean of pauses > 0.2 s, 0 when none qualify.
double mean_length_pauses(std::span<const double> pauses);
double filled_pauses_per_min(std::size_t filler_count, double total_time_s);

FluencyReport make_report(const FluencyInputs& in);

struct SyllableConfig {
  double low_hz = 300.0;
  double high_hz = 2500.0;
  double window_s = 0.020;
  double hop_s = 0.005;
  double rel_threshold = 0.15;  // of the span maximum
  double min_separation_s = 0.080;
  /// Neighbouring peaks whose valley stays above this fraction of the lower
  /// peak belong to one nucleus.
  double valley_ratio = 0.6;
};

/// Envelope peak count inside the given speech spans.
std::size_t count_syllables(const AudioClip& clip, std::span<const TimeSpan> speech_spans,
                            const SyllableConfig& cfg = {});

/// Report for a clip. Pauses are the detected silences (detected here when
/// not supplied) and speech is their complement.
FluencyReport measure(const AudioClip& clip, std::size_t filled_pauses,
                      const std::vector<SilenceSpan>* silences = nullptr);

struct MetricDelta {
  std::string name;
  double before = 0.0;
  double after = 0.0;
  bool higher_is_better = true;

  double delta() const { return after - before; }
  bool improved() const { return higher_is_better ? after > before : after < before; }
  bool not_worse() const { return higher_is_better ? after >= before : after <= before; }
};

/// SR, AR, PTR, MLR up; MLP, FPM down.
std::vector<MetricDelta> compare(const FluencyReport& before, const FluencyReport& after);

/// One `name value` line per metric and input.
std::string format_report(const FluencyReport& r);
FluencyReport parse_report(std::string_view text);

}  // namespace disfluency
