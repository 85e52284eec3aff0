// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disfluency/audio.hpp"
#include "disfluency/silence.hpp"
#include "disfluency/time_span.hpp"

namespace disfluency {

inline constexpr double kCrossfadeS = 0.005;
inline constexpr double kHistogramBinS = 0.05;

enum class FillMode { silence = 0, noise_floor = 1 };
std::string_view to_string(FillMode m);
FillMode fill_mode_from_string(std::string_view s);

enum class EditKind { mask_filler = 0, retime_silence = 1 };
std::string_view to_string(EditKind k);

struct Edit {
  EditKind kind = EditKind::mask_filler;
  TimeSpan span;
  double new_duration_s = 0.0;  // retime only
  FillMode fill = FillMode::noise_floor;
};

/// Masks are mutually disjoint, retimes are mutually disjoint, and a mask
/// either lies inside one retime or touches none. Masks are applied first,
/// so a retime may keep masked material.
struct RepairPlan {
  std::vector<Edit> edits;  // sorted by start
  double target_silence_s = 0.0;
  double source_duration_s = 0.0;

  std::size_t count(EditKind k) const;
  /// Throws PlanError when an edit leaves the source or the layout rules
  /// above are broken.
  void validate() const;
};

/// Looped background taken from the quietest detected silence.
struct NoiseFloor {
  std::vector<double> segment;
  int sample_rate = kCanonicalRate;
  bool fallback = false;  // no usable silence; renders zeros

  /// Exactly n samples: the segment repeated with 5 ms linear crossfades.
  std::vector<double> render(std::size_t n) const;
};

/// Uses `silences` when given, otherwise runs the detector. The chosen
/// silence is trimmed by 10 ms at each end.
NoiseFloor estimate_noise_floor(const AudioClip& clip, const std::vector<SilenceSpan>* silences = nullptr);

/// Replaces each span by zeros or noise floor with a 5 ms crossfade centred
/// on each boundary. Overlapping spans throw PlanError.
AudioClip mask_fillers(const AudioClip& clip, std::span<const TimeSpan> spans, FillMode fill,
                       const NoiseFloor* floor = nullptr);

struct MaskPadding {
  double into_silence_s = 0.05;  // when a detected silence borders the edge
  double search_s = 0.10;        // how far from the edge that silence may end
  double bare_s = 0.03;          // otherwise
};

/// Widens detected filler spans so the crossfades and any edge error land in
/// the neighbouring pauses. Overlapping results are merged.
std::vector<TimeSpan> expand_filler_masks(std::span<const TimeSpan> fillers, std::span<const SilenceSpan> silences,
                                          double clip_duration_s, const MaskPadding& pad = {});

struct SilenceHistogram {
  double bin_width_s = kHistogramBinS;
  std::vector<std::size_t> counts;  // bin k covers [k w, (k + 1) w)
  double median_duration_s = 0.0;
  std::size_t total() const;
};

/// Throws EmptyHistogram on an empty list.
SilenceHistogram fluent_histogram(std::span<const double> durations, double bin_width_s = kHistogramBinS);

/// Centre of the bin that holds the median.
double target_silence(const SilenceHistogram& hist);

struct ClassifiedSilence {
  SilenceSpan span;
  SilenceLabel label = SilenceLabel::fluent;
  double score = 0.0;
};

/// One mask per filler span and one retime to `target_s` per disfluent
/// silence. A retime that partly covers a mask is widened to contain it and
/// retimes that then overlap are joined.
RepairPlan build_plan(double clip_duration_s, std::span<const TimeSpan> filler_masks,
                      std::span<const ClassifiedSilence> silences, double target_s,
                      FillMode fill = FillMode::noise_floor);

/// For every output sample the source index it copies, or -1 when the sample
/// was synthesized or crossfaded.
struct ApplyTrace {
  std::vector<std::int64_t> source;
};

/// Masks in place, then cuts or extends each retimed span: a cut keeps the
/// head and tail joined by one crossfade, an extension inserts noise floor
/// between the two halves with two crossfades. Edit order in the plan does
/// not matter.
AudioClip apply_plan(const AudioClip& clip, const RepairPlan& plan, const NoiseFloor* floor = nullptr,
                     ApplyTrace* trace = nullptr);

/// Text record: header comments with target and source duration, then one
/// edit per line as `kind start end new_duration fill`.
std::string format_plan(const RepairPlan& plan);
RepairPlan parse_plan(std::string_view text);
void write_plan(const RepairPlan& plan, const std::filesystem::path& path);
RepairPlan read_plan(const std::filesystem::path& path);

/// Several plans applied one after another, each starting with its own
/// header line.
std::string format_plans(std::span<const RepairPlan> plans);
std::vector<RepairPlan> parse_plans(std::string_view text);
void write_plans(std::span<const RepairPlan> plans, const std::filesystem::path& path);
std::vector<RepairPlan> read_plans(const std::filesystem::path& path);

}  // namespace disfluency
