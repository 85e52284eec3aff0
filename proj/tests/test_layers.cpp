// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "disfluency/crnn/layers.hpp"
#include "disfluency/crnn/model.hpp"
#include "disfluency/errors.hpp"
#include "oracles.hpp"

using namespace disfluency;
using namespace disfluency::crnn;

namespace {

FeatureMaps random_maps(Rng& rng, int channels, int freq, int time, double lo = -1.0) {
  FeatureMaps m;
  m.freq = freq;
  m.time = time;
  m.data = RowMatrix(channels, freq * time);
  for (Eigen::Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = rng.uniform(lo, 1.0);
  return m;
}

GruWeights random_gru(Rng& rng, int in, int d, double scale) {
  return {oracle::random_matrix(rng, 3 * d, in, scale), oracle::random_matrix(rng, 3 * d, d, scale),
          oracle::random_matrix(rng, 3 * d, 1, scale)};
}

}  // namespace

TEST(Conv, IdentityKernelPassesInput) {
  Rng rng(1);
  const FeatureMaps in = random_maps(rng, 1, 6, 5, 0.0);
  Matrix w = Matrix::Zero(1, 9);
  w(0, 4) = 1.0;
  const FeatureMaps out = conv_forward(in, w, Matrix::Zero(1, 1), 3, 3);
  EXPECT_EQ(out.data, in.data);
}

TEST(Conv, BiasOnZeroInput) {
  FeatureMaps in;
  in.freq = 4;
  in.time = 3;
  in.data = RowMatrix::Zero(2, 12);
  Rng rng(2);
  const Matrix w = oracle::random_matrix(rng, 3, 2 * 16, 1.0);
  const FeatureMaps out = conv_forward(in, w, Matrix::Constant(3, 1, 0.7), 4, 4);
  EXPECT_EQ(out.channels(), 3);
  for (Eigen::Index i = 0; i < out.data.size(); ++i) ASSERT_DOUBLE_EQ(out.data.data()[i], 0.7);
}

TEST(Conv, MatchesNaiveLoops) {
  Rng rng(3);
  const FeatureMaps in = random_maps(rng, 1, 40, 16);
  const Matrix w = oracle::random_matrix(rng, 4, 64, 0.5);
  const Matrix b = oracle::random_matrix(rng, 4, 1, 0.1);
  const FeatureMaps out = conv_forward(in, w, b, 8, 8);
  const FeatureMaps ref = oracle::conv(in, w, b, 8, 8);
  EXPECT_LT((out.data - ref.data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conv, MultiChannelOddEvenKernels) {
  Rng rng(4);
  const FeatureMaps in = random_maps(rng, 3, 10, 7);
  const Matrix w = oracle::random_matrix(rng, 2, 3 * 4 * 3, 0.5);
  const Matrix b = oracle::random_matrix(rng, 2, 1, 0.1);
  EXPECT_LT((conv_forward(in, w, b, 4, 3).data - oracle::conv(in, w, b, 4, 3).data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conv, ShapeMismatchThrows) {
  Rng rng(5);
  const FeatureMaps in = random_maps(rng, 2, 4, 4);
  EXPECT_THROW(conv_forward(in, Matrix::Zero(1, 9), Matrix::Zero(1, 1), 3, 3), ShapeError);
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  const FeatureMaps in = random_maps(rng, 2, 5, 4);
  Matrix w = oracle::random_matrix(rng, 3, 2 * 9, 0.5);
  const Matrix b = oracle::random_matrix(rng, 3, 1, 0.2);
  const RowMatrix probe = oracle::random_matrix(rng, 3, 20, 1.0);
  auto objective = [&](const FeatureMaps& x, const Matrix& ww) {
    return (conv_forward(x, ww, b, 3, 3).data.array() * probe.array()).sum();
  };
  ConvCache cache;
  conv_forward(in, w, b, 3, 3, &cache);
  FeatureMaps g;
  g.freq = 5;
  g.time = 4;
  g.data = probe;
  // Pass the ReLU gate by hand: conv_backward receives post-activation grads.
  for (Eigen::Index i = 0; i < g.data.size(); ++i) {
    if (cache.output.data()[i] <= 0.0) g.data.data()[i] = 0.0;
  }
  Matrix gw = Matrix::Zero(w.rows(), w.cols()), gb = Matrix::Zero(3, 1);
  const FeatureMaps gx = conv_backward(g, cache, w, 3, 3, gw, gb, true);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Matrix wp = w, wm = w;
    wp.data()[i] += h;
    wm.data()[i] -= h;
    EXPECT_NEAR(gw.data()[i], (objective(in, wp) - objective(in, wm)) / (2 * h), 1e-6);
  }
  for (Eigen::Index i = 0; i < in.data.size(); ++i) {
    FeatureMaps xp = in, xm = in;
    xp.data.data()[i] += h;
    xm.data.data()[i] -= h;
    EXPECT_NEAR(gx.data.data()[i], (objective(xp, w) - objective(xm, w)) / (2 * h), 1e-6);
  }
}

TEST(Pool, DefaultArchitecturesGiveExpectedStackedDim) {
  EXPECT_EQ(CrnnArch::mfcc_default().pooled_bins(), 2);
  EXPECT_EQ(CrnnArch::mfcc_default().stacked_dim(), 128);
  EXPECT_EQ(CrnnArch::log_mel_default().pooled_bins(), 4);
  EXPECT_EQ(CrnnArch::log_mel_default().stacked_dim(), 256);
}

TEST(Pool, ConstantAndSpikes) {
  FeatureMaps in;
  in.freq = 10;
  in.time = 3;
  in.data = RowMatrix::Constant(2, 30, -0.4);
  FeatureMaps out = maxpool_freq(in, 5);
  EXPECT_EQ(out.freq, 2);
  EXPECT_EQ(out.time, 3);
  for (Eigen::Index i = 0; i < out.data.size(); ++i) EXPECT_EQ(out.data.data()[i], -0.4);

  in.data.setZero();
  in.data(0, 2 * 3 + 1) = 3.0;  // block 0, t=1
  in.data(1, 7 * 3 + 2) = 5.0;  // block 1, t=2
  out = maxpool_freq(in, 5);
  EXPECT_EQ(out.at(0, 0, 1), 3.0);
  EXPECT_EQ(out.at(1, 1, 2), 5.0);
  EXPECT_EQ(out.at(0, 1, 1), 0.0);
}

TEST(Pool, IndivisibleThrows) {
  FeatureMaps in;
  in.freq = 7;
  in.time = 2;
  in.data = RowMatrix::Zero(1, 14);
  EXPECT_THROW(maxpool_freq(in, 2), ShapeError);
}

TEST(Pool, BackwardRoutesToWinner) {
  Rng rng(7);
  const FeatureMaps in = random_maps(rng, 2, 6, 3);
  PoolCache cache;
  const FeatureMaps out = maxpool_freq(in, 3, &cache);
  FeatureMaps g = out;
  g.data.setOnes();
  const FeatureMaps gi = maxpool_freq_backward(g, cache);
  EXPECT_DOUBLE_EQ(gi.data.sum(), static_cast<double>(out.data.size()));
  for (int c = 0; c < 2; ++c) {
    for (int f = 0; f < 6; ++f) {
      for (int t = 0; t < 3; ++t) {
        const bool winner = in.at(c, f, t) == out.at(c, f / 3, t);
        EXPECT_EQ(gi.at(c, f, t), winner ? 1.0 : 0.0);
      }
    }
  }
}

TEST(Stack, LayoutAndInverse) {
  FeatureMaps in;
  in.freq = 2;
  in.time = 1;
  in.data = RowMatrix(2, 2);
  in.data << 1, 2, 3, 4;  // map 0 = [a, b], map 1 = [c, d]
  const RowMatrix s = stack_maps(in);
  ASSERT_EQ(s.rows(), 4);
  ASSERT_EQ(s.cols(), 1);
  EXPECT_EQ(s(0, 0), 1);
  EXPECT_EQ(s(1, 0), 2);
  EXPECT_EQ(s(2, 0), 3);
  EXPECT_EQ(s(3, 0), 4);

  Rng rng(8);
  const FeatureMaps x = random_maps(rng, 3, 4, 5);
  const FeatureMaps back = unstack_maps(stack_maps(x), 3);
  EXPECT_EQ(back.freq, 4);
  EXPECT_EQ(back.time, 5);
  EXPECT_EQ(back.data, x.data);
}

TEST(Gru, ZeroFixedPoint) {
  GruWeights w{Matrix::Zero(12, 3), Matrix::Zero(12, 4), Matrix::Zero(12, 1)};
  const Matrix h = gru_forward(Matrix::Zero(3, 10), w, Vector::Zero(4));
  EXPECT_EQ(h, Matrix::Zero(4, 10));
}

TEST(Gru, HiddenStaysBounded) {
  Rng rng(9);
  for (int draw = 0; draw < 1000; ++draw) {
    const GruWeights w = random_gru(rng, 3, 4, 5.0);
    const Matrix x = oracle::random_matrix(rng, 3, 8, 10.0);
    const Vector h0 = oracle::random_matrix(rng, 4, 1, 0.999);
    const Matrix h = gru_forward(x, w, h0);
    ASSERT_LE(h.cwiseAbs().maxCoeff(), 1.0) << draw;
  }
}

TEST(Gru, SingleStepByHand) {
  Rng rng(10);
  const GruWeights w = random_gru(rng, 3, 3, 1.0);
  const Matrix x = oracle::random_matrix(rng, 3, 1, 1.0);
  const Vector h0 = oracle::random_matrix(rng, 3, 1, 0.9);
  const Matrix h = gru_forward(x, w, h0);
  for (int k = 0; k < 3; ++k) {
    double az = w.bias(k, 0), ar_unused = 0.0;
    (void)ar_unused;
    for (int i = 0; i < 3; ++i) az += w.input(k, i) * x(i, 0) + w.recurrent(k, i) * h0(i);
    double ac = w.bias(6 + k, 0);
    for (int i = 0; i < 3; ++i) {
      double ar = w.bias(3 + i, 0);
      for (int j = 0; j < 3; ++j) ar += w.input(3 + i, j) * x(j, 0) + w.recurrent(3 + i, j) * h0(j);
      const double ri = 1.0 / (1.0 + std::exp(-ar));
      ac += w.input(6 + k, i) * x(i, 0) + w.recurrent(6 + k, i) * ri * h0(i);
    }
    const double z = 1.0 / (1.0 + std::exp(-az));
    EXPECT_NEAR(h(k, 0), (1 - z) * h0(k) + z * std::tanh(ac), 1e-9);
  }
}

TEST(Gru, MatchesNaiveLoops) {
  Rng rng(11);
  for (int draw = 0; draw < 20; ++draw) {
    const GruWeights w = random_gru(rng, 6, 5, 0.8);
    const Matrix x = oracle::random_matrix(rng, 6, 12, 1.0);
    const Vector h0 = oracle::random_matrix(rng, 5, 1, 0.5);
    EXPECT_LT((gru_forward(x, w, h0) - oracle::gru(x, w, h0)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gru, BackwardMatchesFiniteDifferences) {
  Rng rng(12);
  GruWeights w = random_gru(rng, 3, 4, 0.8);
  const Matrix x = oracle::random_matrix(rng, 3, 5, 1.0);
  const Vector h0 = Vector::Zero(4);
  const Matrix probe = oracle::random_matrix(rng, 4, 5, 1.0);
  GruCache cache;
  gru_forward(x, w, h0, &cache);
  Matrix gi = Matrix::Zero(12, 3), gr = Matrix::Zero(12, 4), gb = Matrix::Zero(12, 1);
  const Matrix gx = gru_backward(probe, cache, w, gi, gr, gb);
  auto obj = [&](const GruWeights& ww, const Matrix& xx) { return (gru_forward(xx, ww, h0).array() * probe.array()).sum(); };
  const double h = 1e-6;
  auto check = [&](Matrix GruWeights::*field, const Matrix& grad) {
    for (Eigen::Index i = 0; i < (w.*field).size(); ++i) {
      GruWeights p = w, m = w;
      (p.*field).data()[i] += h;
      (m.*field).data()[i] -= h;
      EXPECT_NEAR(grad.data()[i], (obj(p, x) - obj(m, x)) / (2 * h), 1e-7);
    }
  };
  check(&GruWeights::input, gi);
  check(&GruWeights::recurrent, gr);
  check(&GruWeights::bias, gb);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix p = x, m = x;
    p.data()[i] += h;
    m.data()[i] -= h;
    EXPECT_NEAR(gx.data()[i], (obj(w, p) - obj(w, m)) / (2 * h), 1e-7);
  }
}

TEST(Forward, MfccWindowShapeAndNormalization) {
  const CrnnModel model = CrnnModel::initialize(CrnnArch::mfcc_default(), 3);
  Rng rng(13);
  RowMatrix x(40, 128);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const Matrix p = forward_window(model, x);
  ASSERT_EQ(p.rows(), 2);
  ASSERT_EQ(p.cols(), 128);
  for (Eigen::Index t = 0; t < p.cols(); ++t) ASSERT_NEAR(p.col(t).sum(), 1.0, 1e-6);
  EXPECT_EQ(forward_window(model, x), p);
}

TEST(Forward, ZeroFinalLayerIsUniform) {
  CrnnModel model = CrnnModel::initialize(CrnnArch::mfcc_default(), 4);
  model.params[model.fc2_weight()].setZero();
  model.params[model.fc2_bias()].setZero();
  Rng rng(14);
  RowMatrix x(40, 20);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const Matrix p = forward_window(model, x);
  for (Eigen::Index i = 0; i < p.size(); ++i) ASSERT_DOUBLE_EQ(p.data()[i], 0.5);
}

TEST(Forward, KindMismatchThrows) {
  const CrnnModel model = CrnnModel::initialize(CrnnArch::mfcc_default(), 5);
  FeatureMatrix fm;
  fm.kind = FeatureKind::log_mel;
  fm.values = RowMatrix::Zero(128, 10);
  EXPECT_THROW(forward(model, fm), ShapeError);
}

TEST(Forward, LongTrackKeepsLength) {
  const CrnnModel model = CrnnModel::initialize(CrnnArch::mfcc_default(), 6);
  FeatureMatrix fm;
  fm.kind = FeatureKind::mfcc;
  fm.values = RowMatrix::Random(40, 300);
  const Matrix p = forward(model, fm);
  EXPECT_EQ(p.cols(), 300);
}

TEST(Checkpoint, RoundTripAndVersionCheck) {
  CrnnModel model = CrnnModel::initialize(oracle::tiny_arch(), 7);
  model.input_mean = Vector::Constant(8, 0.5);
  model.input_scale = Vector::Constant(8, 2.0);
  auto bytes = serialize_model(model);
  const CrnnModel back = deserialize_model(bytes);
  EXPECT_TRUE(back.arch == model.arch);
  ASSERT_EQ(back.params.size(), model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) EXPECT_EQ(back.params[i], model.params[i]);
  EXPECT_EQ(back.input_mean, model.input_mean);
  EXPECT_EQ(serialize_model(back), bytes);

  auto bumped = bytes;
  bumped[12] = static_cast<unsigned char>(bumped[12] + 1);  // version field after magic and kind
  EXPECT_THROW(deserialize_model(bumped), VersionMismatch);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_model(bad_magic), ParseError);
}

TEST(Arch, IndivisiblePoolsRejected) {
  CrnnArch a = CrnnArch::mfcc_default();
  a.input_bins = 42;
  EXPECT_THROW(a.validate(), ShapeError);
}
