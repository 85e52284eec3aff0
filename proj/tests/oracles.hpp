// SPDX-License-Identifier: Apache-2.0
// Brute-force references shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "disfluency/crnn/layers.hpp"
#include "disfluency/crnn/model.hpp"
#include "disfluency/crnn/train.hpp"
#include "disfluency/rng.hpp"

namespace oracle {

using disfluency::RowMatrix;
using disfluency::crnn::FeatureMaps;
using disfluency::crnn::GruWeights;
using disfluency::crnn::Matrix;
using disfluency::crnn::Vector;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Quadruple loop over output channel, frequency, time and kernel taps.
inline FeatureMaps conv(const FeatureMaps& in, const Matrix& w, const Matrix& b, int kf, int kt) {
  const int pf = (kf - 1) / 2, pt = (kt - 1) / 2;
  FeatureMaps out;
  out.freq = in.freq;
  out.time = in.time;
  out.data = RowMatrix::Zero(w.rows(), static_cast<Eigen::Index>(in.freq) * in.time);
  for (int o = 0; o < w.rows(); ++o) {
    for (int y = 0; y < in.freq; ++y) {
      for (int x = 0; x < in.time; ++x) {
        double acc = b(o, 0);
        for (int c = 0; c < in.channels(); ++c) {
          for (int i = 0; i < kf; ++i) {
            for (int j = 0; j < kt; ++j) {
              const int yy = y + i - pf, xx = x + j - pt;
              if (yy < 0 || yy >= in.freq || xx < 0 || xx >= in.time) continue;
              acc += w(o, (c * kf + i) * kt + j) * in.at(c, yy, xx);
            }
          }
        }
        out.data(o, static_cast<Eigen::Index>(y) * in.time + x) = std::max(acc, 0.0);
      }
    }
  }
  return out;
}

/// One scalar step per hidden unit, gates written out longhand.
inline Matrix gru(const Matrix& seq, const GruWeights& w, const Vector& h0) {
  const int d = w.hidden();
  const int n_in = static_cast<int>(seq.rows());
  std::vector<double> h(h0.data(), h0.data() + d);
  Matrix out(d, seq.cols());
  for (int t = 0; t < seq.cols(); ++t) {
    std::vector<double> z(d), r(d), c(d);
    for (int k = 0; k < d; ++k) {
      double az = w.bias(k, 0), ar = w.bias(d + k, 0);
      for (int i = 0; i < n_in; ++i) {
        az += w.input(k, i) * seq(i, t);
        ar += w.input(d + k, i) * seq(i, t);
      }
      for (int j = 0; j < d; ++j) {
        az += w.recurrent(k, j) * h[j];
        ar += w.recurrent(d + k, j) * h[j];
      }
      z[k] = sigmoid(az);
      r[k] = sigmoid(ar);
    }
    for (int k = 0; k < d; ++k) {
      double ac = w.bias(2 * d + k, 0);
      for (int i = 0; i < n_in; ++i) ac += w.input(2 * d + k, i) * seq(i, t);
      for (int j = 0; j < d; ++j) ac += w.recurrent(2 * d + k, j) * r[j] * h[j];
      c[k] = std::tanh(ac);
    }
    for (int k = 0; k < d; ++k) {
      h[k] = (1.0 - z[k]) * h[k] + z[k] * c[k];
      out(k, t) = h[k];
    }
  }
  return out;
}

inline Matrix random_matrix(disfluency::Rng& rng, Eigen::Index r, Eigen::Index c, double scale) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

/// C=8 input, two conv blocks of F=2 maps, two GRU layers of d=4.
inline disfluency::crnn::CrnnArch tiny_arch() {
  disfluency::crnn::CrnnArch a;
  a.input_kind = disfluency::FeatureKind::log_mel;
  a.input_bins = 8;
  a.conv = {{2, 3, 3, 2, 0.25}, {2, 2, 3, 2, 0.25}};
  a.gru_layers = 2;
  a.gru_hidden = 4;
  a.fc_hidden = 5;
  a.fc_dropout = 0.5;
  return a;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
};

/// Central differences (h = 1e-4) of the training-mode loss for every
/// parameter of the tiny net. Dropout masks are replayed with a fixed seed
/// so the perturbed and unperturbed passes see the same network.
inline GradCheck gradient_check(std::uint64_t seed, double lambda = 0.01) {
  using namespace disfluency::crnn;
  disfluency::Rng rng(seed);
  CrnnModel model = CrnnModel::initialize(tiny_arch(), seed);
  // Non-zero biases so that no gradient is trivially zero by symmetry.
  for (auto& p : model.params) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] += rng.uniform(-0.3, 0.3);
  }
  const int T = 6;
  RowMatrix x(8, T);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  std::vector<int> labels(T);
  for (int t = 0; t < T; ++t) labels[t] = static_cast<int>(rng.uniform_int(0, 1));
  const std::uint64_t mask_seed = disfluency::mix_seed(seed, 99);

  auto eval = [&](const CrnnModel& m, ForwardCache* cache) {
    disfluency::Rng masks(mask_seed);
    ForwardOptions opts{true, &masks};
    const Matrix p = forward_window(m, x, opts, cache);
    return loss(p, labels, m, lambda);
  };
  ForwardCache cache;
  eval(model, &cache);
  const Gradients g = backward(model, cache, labels, lambda);

  GradCheck out;
  const double h = 1e-4;
  for (std::size_t k = 0; k < model.params.size(); ++k) {
    for (Eigen::Index i = 0; i < model.params[k].size(); ++i) {
      CrnnModel plus = model, minus = model;
      plus.params[k].data()[i] += h;
      minus.params[k].data()[i] -= h;
      const double fd = (eval(plus, nullptr) - eval(minus, nullptr)) / (2 * h);
      const double a = g[k].data()[i];
      const double rel = std::abs(a - fd) / (std::abs(a) + 1e-8);
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_tensor = k;
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace oracle
