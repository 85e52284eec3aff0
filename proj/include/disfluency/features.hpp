// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "disfluency/audio.hpp"

namespace disfluency {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kFrameLenS = 0.030;
inline constexpr double kHopS = 0.015;
inline constexpr int kLogMelBands = 128;
inline constexpr int kMfccCoeffs = 40;
inline constexpr double kLogFloor = 1e-10;

enum class FeatureKind : std::uint32_t { log_mel = 0, mfcc = 1, mean_mfcc = 2 };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

/// C x T grid of frame features. Column t describes the analysis frame that
/// starts at t * hop_s; origin_s is the center of frame 0.
struct FeatureMatrix {
  RowMatrix values;
  FeatureKind kind = FeatureKind::log_mel;
  double frame_len_s = kFrameLenS;
  double hop_s = kHopS;
  double origin_s = kFrameLenS / 2;

  Eigen::Index bins() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
};

/// Frame geometry for a given rate: 30 ms windows advanced by 15 ms.
struct FrameGeometry {
  int frame_len;
  int hop;
  int fft_size;
  static FrameGeometry for_rate(int sample_rate);
};

/// Number of full frames in n samples (0 when shorter than one frame).
std::size_t frame_count(std::size_t n_samples, const FrameGeometry& geom);

class MelFilterbank {
 public:
  /// Triangular filters on the 2595*log10(1 + f/700) scale spanning 0 Hz to
  /// Nyquist. A filter narrower than the bin spacing collapses onto its
  /// nearest bin so that no row is all zero.
  MelFilterbank(int n_mels, int fft_size, int sample_rate);

  const RowMatrix& weights() const { return weights_; }
  int sample_rate() const { return sample_rate_; }
  int fft_size() const { return fft_size_; }
  /// Center frequency of filter i in Hz.
  double center_hz(int i) const { return centers_[static_cast<std::size_t>(i)]; }

 private:
  RowMatrix weights_;
  std::vector<double> centers_;
  int sample_rate_;
  int fft_size_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// T x frame_len matrix of Hann-windowed frames. Throws TooShort when the
/// clip holds less than one frame.
RowMatrix frame_signal(const AudioClip& clip);

FeatureMatrix log_mel(const AudioClip& clip);
FeatureMatrix mfcc(const AudioClip& clip);
/// Orthonormal DCT-II of log-mel columns keeping the first kMfccCoeffs rows.
FeatureMatrix mfcc_from_log_mel(const FeatureMatrix& log_mel);
FeatureMatrix mean_over_frequency(const FeatureMatrix& fm);

FeatureMatrix extract(const AudioClip& clip, FeatureKind kind);

/// Feature dump: "DFFEAT01", u32 kind, u32 C, u32 T, f64 frame_len_s,
/// f64 hop_s, f64 origin_s, then C*T row-major float32 values.
void write_feature_dump(const FeatureMatrix& fm, const std::filesystem::path& path);
FeatureMatrix read_feature_dump(const std::filesystem::path& path);

}  // namespace disfluency
