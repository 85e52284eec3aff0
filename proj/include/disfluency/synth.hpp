// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "disfluency/audio.hpp"
#include "disfluency/frame_labels.hpp"
#include "disfluency/time_span.hpp"

namespace disfluency {

enum class SpanClass { word = 0, filler = 1, silence_fluent = 2, silence_disfluent = 3 };
std::string_view to_string(SpanClass c);
SpanClass span_class_from_string(std::string_view s);
inline bool is_silence(SpanClass c) { return c == SpanClass::silence_fluent || c == SpanClass::silence_disfluent; }

struct LabeledSpan {
  double start_s = 0.0;
  double end_s = 0.0;
  SpanClass cls = SpanClass::word;
  int syllables = 0;  // words only

  TimeSpan span() const { return {start_s, end_s}; }
  double duration_s() const { return end_s - start_s; }
};

struct LabelTrack {
  std::vector<LabeledSpan> spans;

  std::vector<TimeSpan> spans_of(SpanClass c) const;
  std::size_t count(SpanClass c) const;
  int total_syllables() const;
  double duration_s() const { return spans.empty() ? 0.0 : spans.back().end_s; }
  /// Throws ParseError unless the spans are sorted, positive and contiguous
  /// from 0 (to `duration_s` when given).
  void validate(double duration_s = -1.0) const;
  /// The silence spans directly before or after a filler.
  bool filler_adjacent(std::size_t i) const;
};

/// Line format: `start end class [syllables]`, `#` comments.
std::string format_labels(const LabelTrack& t);
LabelTrack parse_labels(std::string_view text);
void write_labels(const LabelTrack& t, const std::filesystem::path& path);
LabelTrack read_labels(const std::filesystem::path& path);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SynthSpec {
  int n_clips = 200;
  double clip_len_s = 10.0;
  double filler_rate = 8.0;  // per minute
  Range disfluent_pause_s{0.75, 2.0};
  Range fluent_pause_s{0.1, 0.4};
  Range word_len_s{0.2, 0.8};
  double disfluent_pause_prob = 0.12;
  double snr_db = 30.0;
  std::uint64_t seed = 1;
  int sample_rate = kCanonicalRate;

  /// Throws SpecError on unordered or infeasible settings.
  void validate() const;
};

struct SynthClip {
  AudioClip audio;
  LabelTrack labels;
};

/// Fully determined by (spec.seed, clip_seed). Fillers come with a pause on
/// each side labelled disfluent; the other pauses are fluent or, with
/// probability disfluent_pause_prob, drawn from the disfluent range.
SynthClip generate_clip(const SynthSpec& spec, std::uint64_t clip_seed);

/// Renders a given layout with the generator's voices and noise. Words are
/// split into equal syllables; silence classes are kept as given.
SynthClip render_labels(const SynthSpec& spec, const LabelTrack& layout, std::uint64_t clip_seed = 0);

struct ManifestEntry {
  std::string id;
  std::filesystem::path wav;     // absolute after read_manifest
  std::filesystem::path labels;  // empty when unlabeled
  std::uint64_t clip_seed = 0;
  std::size_t words = 0;
  std::size_t fillers = 0;
  std::size_t fluent = 0;
  std::size_t disfluent = 0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

inline constexpr std::string_view kManifestName = "manifest.txt";

/// Writes clip_NNNN.wav / .lab pairs and manifest.txt into out_dir.
Manifest generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Paths are stored relative to the manifest's directory.
void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Class of the span holding each frame centre origin + t * hop; fillers map
/// to kFiller, everything else to kNonFiller.
FrameLabels project_labels(const LabelTrack& labels, std::size_t frames, double hop_s, double origin_s);

}  // namespace disfluency
