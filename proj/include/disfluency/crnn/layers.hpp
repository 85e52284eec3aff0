// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>

#include "disfluency/features.hpp"

namespace disfluency::crnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Stack of per-channel (freq x time) maps. Channel c, bin f, frame t lives at
/// data(c, f * time + t), so each channel row is a row-major freq x time image.
struct FeatureMaps {
  RowMatrix data;
  int freq = 0;
  int time = 0;

  int channels() const { return static_cast<int>(data.rows()); }
  double at(int c, int f, int t) const { return data(c, static_cast<Eigen::Index>(f) * time + t); }
  static FeatureMaps from_matrix(const RowMatrix& c_by_t);
};

struct ConvCache {
  RowMatrix columns;  // im2col patches, (Cin * kf * kt) x (freq * time)
  RowMatrix output;   // post-ReLU activations
  int in_channels = 0;
  int freq = 0;
  int time = 0;
};

/// Same-padded 2-D cross-correlation over (freq, time), plus bias, then ReLU.
/// weight is F x (Cin * kf * kt) with column (c * kf + i) * kt + j; padding
/// before each axis is (k - 1) / 2.
FeatureMaps conv_forward(const FeatureMaps& input, const Matrix& weight, const Matrix& bias,
                         int kernel_freq, int kernel_time, ConvCache* cache = nullptr);

/// Accumulates into grad_weight / grad_bias. Returns the input gradient when
/// need_input_grad is set, otherwise an empty map.
FeatureMaps conv_backward(const FeatureMaps& grad_output, const ConvCache& cache,
                          const Matrix& weight, int kernel_freq, int kernel_time,
                          Matrix& grad_weight, Matrix& grad_bias, bool need_input_grad);

struct PoolCache {
  std::vector<int> winner;  // input freq index of each output element
  int in_freq = 0;
};

/// Non-overlapping max over blocks of `pool` frequency bins; time untouched.
FeatureMaps maxpool_freq(const FeatureMaps& input, int pool, PoolCache* cache = nullptr);
FeatureMaps maxpool_freq_backward(const FeatureMaps& grad_output, const PoolCache& cache);

/// (F * M') x T: rows i*M' .. (i+1)*M' - 1 hold map i.
RowMatrix stack_maps(const FeatureMaps& input);
FeatureMaps unstack_maps(const RowMatrix& stacked, int channels);

/// GRU parameters with gates stacked [update; reset; candidate].
struct GruWeights {
  Matrix input;      // 3d x D
  Matrix recurrent;  // 3d x d
  Matrix bias;       // 3d x 1
  int hidden() const { return static_cast<int>(recurrent.cols()); }
};

struct GruCache {
  Matrix input;   // D x T
  Matrix update;  // z, d x T
  Matrix reset;   // r
  Matrix cand;    // candidate state
  Matrix h_prev;  // state entering step t
  Matrix reset_h; // r * h_prev
  Matrix output;  // d x T
};

/// z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
/// c = tanh(Wc x + Uc (r * h) + bc), h' = (1 - z) h + z c.
Matrix gru_forward(const Matrix& seq, const GruWeights& w, const Vector& h0, GruCache* cache = nullptr);

/// Backprop through time. Accumulates into the three gradient tensors and
/// returns the gradient with respect to the input sequence.
Matrix gru_backward(const Matrix& grad_output, const GruCache& cache, const GruWeights& w,
                    Matrix& grad_input, Matrix& grad_recurrent, Matrix& grad_bias);

}  // namespace disfluency::crnn
