// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "disfluency/errors.hpp"
#include "disfluency/features.hpp"
#include "disfluency/rng.hpp"

using namespace disfluency;

namespace {

AudioClip tone(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  std::vector<double> x(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2 * M_PI * hz * i / rate);
  return AudioClip(x, rate);
}

AudioClip noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& s : x) s = 0.3 * rng.normal();
  return AudioClip(x, 16000);
}

// Brute-force log-mel: direct DFT of each periodic-Hann frame zero-padded to
// 512 points, triangles evaluated from their mel-spaced corner frequencies.
RowMatrix naive_log_mel(const AudioClip& clip) {
  const int len = 480, hop = 240, nfft = 512, bands = 128, rate = clip.sample_rate();
  const std::size_t frames = (clip.size() - len) / hop + 1;
  const double top = 2595.0 * std::log10(1.0 + (rate / 2.0) / 700.0);
  std::vector<double> corner(bands + 2);
  for (int i = 0; i < bands + 2; ++i) corner[i] = 700.0 * (std::pow(10.0, top * i / (bands + 1) / 2595.0) - 1.0);

  RowMatrix out(bands, static_cast<Eigen::Index>(frames));
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> power(nfft / 2 + 1);
    for (int k = 0; k <= nfft / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (int i = 0; i < len; ++i) {
        const double w = 0.5 * (1.0 - std::cos(2 * M_PI * i / len));
        acc += w * clip.data()[t * hop + i] * std::polar(1.0, -2 * M_PI * k * i / nfft);
      }
      power[k] = std::norm(acc);
    }
    for (int m = 0; m < bands; ++m) {
      double e = 0.0;
      bool touched = false;
      for (int k = 0; k <= nfft / 2; ++k) {
        const double f = k * static_cast<double>(rate) / nfft;
        double w = 0.0;
        if (f > corner[m] && f <= corner[m + 1]) w = (f - corner[m]) / (corner[m + 1] - corner[m]);
        if (f > corner[m + 1] && f < corner[m + 2]) w = (corner[m + 2] - f) / (corner[m + 2] - corner[m + 1]);
        if (w > 0) touched = true;
        e += w * power[k];
      }
      if (!touched) e = power[static_cast<int>(std::lround(corner[m + 1] * nfft / rate))];
      out(m, static_cast<Eigen::Index>(t)) = std::log(e + 1e-10);
    }
  }
  return out;
}

}  // namespace

TEST(Framing, FrameCounts) {
  EXPECT_EQ(frame_signal(AudioClip(std::vector<double>(16000, 0.1), 16000)).rows(), 65);
  EXPECT_EQ(frame_signal(AudioClip(std::vector<double>(480, 0.1), 16000)).rows(), 1);
  EXPECT_THROW(frame_signal(AudioClip(std::vector<double>(479, 0.1), 16000)), TooShort);
}

TEST(Framing, GeometryAt16k) {
  const auto g = FrameGeometry::for_rate(16000);
  EXPECT_EQ(g.frame_len, 480);
  EXPECT_EQ(g.hop, 240);
  EXPECT_EQ(g.fft_size, 512);
}

TEST(Framing, HannWindowPeriodic) {
  const RowMatrix f = frame_signal(AudioClip(std::vector<double>(480, 1.0), 16000));
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_NEAR(f(0, 240), 1.0, 1e-15);
  EXPECT_NEAR(f(0, 120), 0.5, 1e-12);
  EXPECT_NEAR(f(0, 1), f(0, 479), 1e-15);
}

TEST(LogMel, ShapeAndOrigin) {
  const FeatureMatrix fm = log_mel(tone(440, 1.0));
  EXPECT_EQ(fm.bins(), 128);
  EXPECT_EQ(fm.frames(), 65);
  EXPECT_DOUBLE_EQ(fm.hop_s, 0.015);
  EXPECT_DOUBLE_EQ(fm.origin_s, 0.015);
}

TEST(LogMel, ZeroClipIsLogFloor) {
  const FeatureMatrix fm = log_mel(AudioClip(std::vector<double>(4000, 0.0), 16000));
  for (Eigen::Index i = 0; i < fm.values.size(); ++i) ASSERT_EQ(fm.values.data()[i], std::log(1e-10));
}

TEST(LogMel, MatchesBruteForceDft) {
  const AudioClip clip = noise(2400, 11);
  const RowMatrix ref = naive_log_mel(clip);
  const FeatureMatrix fm = log_mel(clip);
  ASSERT_EQ(fm.values.rows(), ref.rows());
  ASSERT_EQ(fm.values.cols(), ref.cols());
  EXPECT_LT((fm.values - ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LogMel, ToneDominantBandIsStable) {
  const FeatureMatrix fm = log_mel(tone(1000, 1.0));
  const MelFilterbank bank(128, 512, 16000);
  Eigen::Index first = -1;
  for (Eigen::Index t = 0; t < fm.frames(); ++t) {
    Eigen::Index best;
    fm.values.col(t).maxCoeff(&best);
    if (first < 0) first = best;
    ASSERT_EQ(best, first);
  }
  // The winning triangle has to cover 1 kHz.
  EXPECT_GT(bank.weights()(first, 32), 0.0);
}

TEST(LogMel, NoEmptyFilters) {
  const MelFilterbank bank(128, 512, 16000);
  for (Eigen::Index m = 0; m < bank.weights().rows(); ++m) EXPECT_GT(bank.weights().row(m).sum(), 0.0) << m;
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Mfcc, ShapeIs40ByT) {
  const FeatureMatrix fm = mfcc(tone(300, 1.0));
  EXPECT_EQ(fm.bins(), 40);
  EXPECT_EQ(fm.frames(), 65);
  EXPECT_EQ(fm.kind, FeatureKind::mfcc);
}

TEST(Mfcc, ZeroClipCoefficients) {
  const FeatureMatrix fm = mfcc(AudioClip(std::vector<double>(1600, 0.0), 16000));
  const double c0 = std::sqrt(1.0 / 128) * 128 * std::log(1e-10);
  for (Eigen::Index t = 0; t < fm.frames(); ++t) {
    EXPECT_NEAR(fm.values(0, t), c0, 1e-9);
    for (Eigen::Index k = 1; k < 40; ++k) ASSERT_NEAR(fm.values(k, t), 0.0, 1e-9);
  }
}

TEST(Mfcc, GainOnlyMovesC0) {
  const AudioClip a = noise(8000, 5);
  std::vector<double> scaled(a.data());
  for (auto& s : scaled) s *= 0.25;
  const FeatureMatrix fa = mfcc(a);
  const FeatureMatrix fb = mfcc(AudioClip(scaled, 16000));
  // log(g^2 P + eps) ~ 2 log g + log P while P >> eps.
  const double shift = std::sqrt(128.0) * 2 * std::log(0.25);
  for (Eigen::Index t = 0; t < fa.frames(); ++t) {
    EXPECT_NEAR(fb.values(0, t) - fa.values(0, t), shift, 1e-6);
    for (Eigen::Index k = 1; k < 40; ++k) ASSERT_NEAR(fb.values(k, t), fa.values(k, t), 1e-6);
  }
}

TEST(Mfcc, MatchesHandDct) {
  Rng rng(2);
  FeatureMatrix lm;
  lm.values = RowMatrix(128, 3);
  for (Eigen::Index i = 0; i < lm.values.size(); ++i) lm.values.data()[i] = rng.uniform(-5, 5);
  const FeatureMatrix c = mfcc_from_log_mel(lm);
  for (int k = 0; k < 40; ++k) {
    for (int t = 0; t < 3; ++t) {
      double acc = 0.0;
      for (int i = 0; i < 128; ++i) acc += lm.values(i, t) * std::cos(M_PI * k * (i + 0.5) / 128);
      acc *= k == 0 ? std::sqrt(1.0 / 128) : std::sqrt(2.0 / 128);
      ASSERT_NEAR(c.values(k, t), acc, 1e-9);
    }
  }
}

TEST(MeanOverFrequency, Basics) {
  FeatureMatrix fm;
  fm.values = RowMatrix::Constant(7, 5, 3.5);
  FeatureMatrix m = mean_over_frequency(fm);
  ASSERT_EQ(m.bins(), 1);
  for (Eigen::Index t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(m.values(0, t), 3.5);

  fm.values = RowMatrix(3, 1);
  fm.values << 1, 2, 3;
  EXPECT_DOUBLE_EQ(mean_over_frequency(fm).values(0, 0), 2.0);

  Rng rng(9);
  fm.values = RowMatrix(6, 4);
  for (Eigen::Index i = 0; i < fm.values.size(); ++i) fm.values.data()[i] = rng.uniform();
  FeatureMatrix perm = fm;
  perm.values = fm.values.colwise().reverse();
  EXPECT_LT((mean_over_frequency(fm).values - mean_over_frequency(perm).values).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FeatureDump, RoundTrip) {
  const FeatureMatrix fm = mfcc(noise(3000, 4));
  const auto path = std::filesystem::temp_directory_path() / "disfluency_feat.bin";
  write_feature_dump(fm, path);
  const FeatureMatrix back = read_feature_dump(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.kind, fm.kind);
  ASSERT_EQ(back.values.rows(), fm.values.rows());
  ASSERT_EQ(back.values.cols(), fm.values.cols());
  EXPECT_LT((back.values - fm.values.cast<float>().cast<double>()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FeatureKindNames, RoundTrip) {
  for (auto k : {FeatureKind::log_mel, FeatureKind::mfcc, FeatureKind::mean_mfcc}) {
    EXPECT_EQ(feature_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(feature_kind_from_string("plp"), ParseError);
}
