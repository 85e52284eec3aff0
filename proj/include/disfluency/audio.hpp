// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace disfluency {

inline constexpr int kCanonicalRate = 16000;

/// Mono PCM clip with samples in [-1, 1]. Immutable after construction.
class AudioClip {
 public:
  AudioClip() = default;

  /// Non-finite samples are rejected with ParseError; samples outside
  /// [-1, 1] are clamped and counted in clamped_count().
  AudioClip(std::vector<double> samples, int sample_rate);

  std::span<const double> samples() const { return samples_; }
  const std::vector<double>& data() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double duration_s() const {
    return sample_rate_ > 0 ? static_cast<double>(samples_.size()) / sample_rate_ : 0.0;
  }
  std::size_t clamped_count() const { return clamped_; }

  /// Sample index nearest to a time in seconds, clamped to [0, size()].
  std::size_t index_at(double t_s) const;

  /// Copy of [begin, end) sample indices (clamped to the clip).
  AudioClip slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kCanonicalRate;
  std::size_t clamped_ = 0;
};

AudioClip read_wav(const std::filesystem::path& path);

/// 16-bit PCM mono. Samples are rounded to the nearest step of 1/32768 and
/// saturated at the integer range.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// In-memory variants used by the file functions and by tests.
AudioClip decode_wav(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_wav(const AudioClip& clip);

/// Linear-interpolation resampler. Returns an identical copy when the rates
/// already match.
AudioClip resample(const AudioClip& clip, int target_hz);

}  // namespace disfluency
