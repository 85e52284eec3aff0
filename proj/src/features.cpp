// SPDX-License-Identifier: Apache-2.0
#include "disfluency/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "disfluency/binary_io.hpp"
#include "disfluency/errors.hpp"

namespace disfluency {

namespace {

constexpr std::string_view kDumpMagic = "DFFEAT01";

// fftw planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  /// Power spectrum of a zero-padded frame into `power` (n/2+1 values).
  void power(const double* frame, int len, double* power) {
    std::fill(in_, in_ + n_, 0.0);
    std::copy(frame, frame + len, in_);
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

const RowMatrix& dct_matrix() {
  static const RowMatrix dct = [] {
    RowMatrix d(kMfccCoeffs, kLogMelBands);
    const double n = kLogMelBands;
    for (int k = 0; k < kMfccCoeffs; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (int i = 0; i < kLogMelBands; ++i) d(k, i) = scale * std::cos(M_PI * k * (2.0 * i + 1.0) / (2.0 * n));
    }
    return d;
  }();
  return dct;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::log_mel: return "log_mel";
    case FeatureKind::mfcc: return "mfcc";
    case FeatureKind::mean_mfcc: return "mean_mfcc";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "log_mel" || name == "logmel") return FeatureKind::log_mel;
  if (name == "mfcc") return FeatureKind::mfcc;
  if (name == "mean_mfcc") return FeatureKind::mean_mfcc;
  throw ParseError("unknown feature kind '" + std::string(name) + "'");
}

FrameGeometry FrameGeometry::for_rate(int sample_rate) {
  FrameGeometry g{};
  g.frame_len = static_cast<int>(std::lround(kFrameLenS * sample_rate));
  g.hop = static_cast<int>(std::lround(kHopS * sample_rate));
  g.fft_size = 1;
  while (g.fft_size < g.frame_len) g.fft_size <<= 1;
  return g;
}

std::size_t frame_count(std::size_t n_samples, const FrameGeometry& geom) {
  const auto len = static_cast<std::size_t>(geom.frame_len);
  if (n_samples < len) return 0;
  return (n_samples - len) / static_cast<std::size_t>(geom.hop) + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(int n_mels, int fft_size, int sample_rate)
    : weights_(RowMatrix::Zero(n_mels, fft_size / 2 + 1)),
      centers_(static_cast<std::size_t>(n_mels)),
      sample_rate_(sample_rate),
      fft_size_(fft_size) {
  const int n_bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_hi * i / (n_mels + 1));
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;

  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    centers_[static_cast<std::size_t>(m)] = mid;
    bool any = false;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      if (w > 0.0) {
        weights_(m, k) = w;
        any = true;
      }
    }
    if (!any) {
      const int nearest = std::clamp(static_cast<int>(std::lround(mid / bin_hz)), 0, n_bins - 1);
      weights_(m, nearest) = 1.0;
    }
  }
}

RowMatrix frame_signal(const AudioClip& clip) {
  const auto geom = FrameGeometry::for_rate(clip.sample_rate());
  const std::size_t t_count = frame_count(clip.size(), geom);
  if (t_count == 0) {
    throw TooShort("clip has " + std::to_string(clip.size()) + " samples; one frame needs " +
                   std::to_string(geom.frame_len));
  }
  std::vector<double> window(static_cast<std::size_t>(geom.frame_len));
  for (int i = 0; i < geom.frame_len; ++i) {
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / geom.frame_len);
  }
  RowMatrix frames(static_cast<Eigen::Index>(t_count), geom.frame_len);
  const auto x = clip.samples();
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(geom.hop);
    for (int i = 0; i < geom.frame_len; ++i) {
      frames(static_cast<Eigen::Index>(t), i) = x[start + static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
    }
  }
  return frames;
}

FeatureMatrix log_mel(const AudioClip& clip) {
  const auto geom = FrameGeometry::for_rate(clip.sample_rate());
  const RowMatrix frames = frame_signal(clip);
  const MelFilterbank bank(kLogMelBands, geom.fft_size, clip.sample_rate());
  const int n_bins = geom.fft_size / 2 + 1;

  RowMatrix power(frames.rows(), n_bins);
  RealFft fft(geom.fft_size);
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    fft.power(frames.row(t).data(), geom.frame_len, power.row(t).data());
  }

  FeatureMatrix fm;
  fm.kind = FeatureKind::log_mel;
  fm.frame_len_s = static_cast<double>(geom.frame_len) / clip.sample_rate();
  fm.hop_s = static_cast<double>(geom.hop) / clip.sample_rate();
  fm.origin_s = fm.frame_len_s / 2;
  fm.values = (bank.weights() * power.transpose()).array().max(0.0).unaryExpr(
      [](double e) { return std::log(e + kLogFloor); });
  return fm;
}

FeatureMatrix mfcc_from_log_mel(const FeatureMatrix& lm) {
  if (lm.kind != FeatureKind::log_mel || lm.bins() != kLogMelBands) {
    throw ShapeError("mfcc needs a 128-band log-mel matrix");
  }
  FeatureMatrix fm = lm;
  fm.kind = FeatureKind::mfcc;
  fm.values = dct_matrix() * lm.values;
  return fm;
}

FeatureMatrix mfcc(const AudioClip& clip) { return mfcc_from_log_mel(log_mel(clip)); }

FeatureMatrix mean_over_frequency(const FeatureMatrix& fm) {
  FeatureMatrix out = fm;
  out.kind = FeatureKind::mean_mfcc;
  out.values = fm.values.colwise().mean();
  return out;
}

FeatureMatrix extract(const AudioClip& clip, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::log_mel: return log_mel(clip);
    case FeatureKind::mfcc: return mfcc(clip);
    case FeatureKind::mean_mfcc: return mean_over_frequency(mfcc(clip));
  }
  throw ShapeError("unknown feature kind");
}

void write_feature_dump(const FeatureMatrix& fm, const std::filesystem::path& path) {
  ByteWriter w;
  w.bytes(kDumpMagic);
  w.u32(static_cast<std::uint32_t>(fm.kind));
  w.u32(static_cast<std::uint32_t>(fm.bins()));
  w.u32(static_cast<std::uint32_t>(fm.frames()));
  w.f64(fm.frame_len_s);
  w.f64(fm.hop_s);
  w.f64(fm.origin_s);
  for (Eigen::Index c = 0; c < fm.bins(); ++c)
    for (Eigen::Index t = 0; t < fm.frames(); ++t) w.f32(static_cast<float>(fm.values(c, t)));
  w.save(path);
}

FeatureMatrix read_feature_dump(const std::filesystem::path& path) {
  auto r = ByteReader::load(path);
  if (r.bytes(kDumpMagic.size()) != kDumpMagic) throw ParseError("not a feature dump: " + path.string());
  FeatureMatrix fm;
  const std::uint32_t kind = r.u32();
  if (kind > 2) throw ParseError("unknown feature kind in dump");
  fm.kind = static_cast<FeatureKind>(kind);
  const std::uint32_t c = r.u32();
  const std::uint32_t t = r.u32();
  fm.frame_len_s = r.f64();
  fm.hop_s = r.f64();
  fm.origin_s = r.f64();
  fm.values.resize(c, t);
  for (std::uint32_t i = 0; i < c; ++i)
    for (std::uint32_t j = 0; j < t; ++j) fm.values(i, j) = r.f32();
  if (!r.at_end()) throw ParseError("trailing bytes in feature dump");
  return fm;
}

}  // namespace disfluency
