// SPDX-License-Identifier: Apache-2.0
#include "disfluency/crnn/layers.hpp"

#include <cmath>
#include <limits>

#include "disfluency/errors.hpp"

namespace disfluency::crnn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

FeatureMaps FeatureMaps::from_matrix(const RowMatrix& c_by_t) {
  FeatureMaps m;
  m.freq = static_cast<int>(c_by_t.rows());
  m.time = static_cast<int>(c_by_t.cols());
  m.data = Eigen::Map<const RowMatrix>(c_by_t.data(), 1, c_by_t.size());
  return m;
}

FeatureMaps conv_forward(const FeatureMaps& input, const Matrix& weight, const Matrix& bias,
                         int kernel_freq, int kernel_time, ConvCache* cache) {
  const int cin = input.channels();
  const int H = input.freq;
  const int T = input.time;
  const int patch = cin * kernel_freq * kernel_time;
  if (weight.cols() != patch || bias.rows() != weight.rows() || bias.cols() != 1) {
    throw ShapeError("conv weight shape does not match input channels and kernel");
  }
  if (input.data.cols() != static_cast<Eigen::Index>(H) * T) throw ShapeError("feature map size mismatch");
  const int pad_f = (kernel_freq - 1) / 2;
  const int pad_t = (kernel_time - 1) / 2;

  RowMatrix cols = RowMatrix::Zero(patch, static_cast<Eigen::Index>(H) * T);
  for (int c = 0; c < cin; ++c) {
    const double* src = input.data.row(c).data();
    for (int i = 0; i < kernel_freq; ++i) {
      for (int j = 0; j < kernel_time; ++j) {
        double* dst = cols.row((c * kernel_freq + i) * kernel_time + j).data();
        const int dt = j - pad_t;
        const int t_lo = std::max(0, -dt);
        const int t_hi = std::min(T, T - dt);
        for (int h = 0; h < H; ++h) {
          const int hs = h + i - pad_f;
          if (hs < 0 || hs >= H) continue;
          const double* s = src + static_cast<std::ptrdiff_t>(hs) * T + dt;
          double* d = dst + static_cast<std::ptrdiff_t>(h) * T;
          for (int t = t_lo; t < t_hi; ++t) d[t] = s[t];
        }
      }
    }
  }

  FeatureMaps out;
  out.freq = H;
  out.time = T;
  out.data.noalias() = weight * cols;
  out.data.colwise() += bias.col(0);
  out.data = out.data.cwiseMax(0.0);
  if (cache != nullptr) {
    cache->columns = std::move(cols);
    cache->output = out.data;
    cache->in_channels = cin;
    cache->freq = H;
    cache->time = T;
  }
  return out;
}

FeatureMaps conv_backward(const FeatureMaps& grad_output, const ConvCache& cache,
                          const Matrix& weight, int kernel_freq, int kernel_time,
                          Matrix& grad_weight, Matrix& grad_bias, bool need_input_grad) {
  const RowMatrix pre = (cache.output.array() > 0.0).select(grad_output.data.array(), 0.0).matrix();
  grad_weight.noalias() += pre * cache.columns.transpose();
  grad_bias.col(0) += pre.rowwise().sum();

  FeatureMaps grad_in;
  if (!need_input_grad) return grad_in;
  const int H = cache.freq;
  const int T = cache.time;
  const int pad_f = (kernel_freq - 1) / 2;
  const int pad_t = (kernel_time - 1) / 2;
  const RowMatrix dcols = weight.transpose() * pre;
  grad_in.freq = H;
  grad_in.time = T;
  grad_in.data = RowMatrix::Zero(cache.in_channels, static_cast<Eigen::Index>(H) * T);
  for (int c = 0; c < cache.in_channels; ++c) {
    double* dst = grad_in.data.row(c).data();
    for (int i = 0; i < kernel_freq; ++i) {
      for (int j = 0; j < kernel_time; ++j) {
        const double* src = dcols.row((c * kernel_freq + i) * kernel_time + j).data();
        const int dt = j - pad_t;
        const int t_lo = std::max(0, -dt);
        const int t_hi = std::min(T, T - dt);
        for (int h = 0; h < H; ++h) {
          const int hs = h + i - pad_f;
          if (hs < 0 || hs >= H) continue;
          double* d = dst + static_cast<std::ptrdiff_t>(hs) * T + dt;
          const double* s = src + static_cast<std::ptrdiff_t>(h) * T;
          for (int t = t_lo; t < t_hi; ++t) d[t] += s[t];
        }
      }
    }
  }
  return grad_in;
}

FeatureMaps maxpool_freq(const FeatureMaps& input, int pool, PoolCache* cache) {
  if (pool <= 0 || input.freq % pool != 0) {
    throw ShapeError("frequency size " + std::to_string(input.freq) + " not divisible by pool " +
                     std::to_string(pool));
  }
  const int C = input.channels();
  const int T = input.time;
  const int out_f = input.freq / pool;
  FeatureMaps out;
  out.freq = out_f;
  out.time = T;
  out.data.resize(C, static_cast<Eigen::Index>(out_f) * T);
  std::vector<int> winner;
  if (cache != nullptr) winner.resize(static_cast<std::size_t>(C) * out_f * T);
  for (int c = 0; c < C; ++c) {
    for (int m = 0; m < out_f; ++m) {
      for (int t = 0; t < T; ++t) {
        int best = m * pool;
        double best_v = input.at(c, best, t);
        for (int k = 1; k < pool; ++k) {
          const double v = input.at(c, m * pool + k, t);
          if (v > best_v) {
            best_v = v;
            best = m * pool + k;
          }
        }
        out.data(c, static_cast<Eigen::Index>(m) * T + t) = best_v;
        if (cache != nullptr) winner[(static_cast<std::size_t>(c) * out_f + m) * T + t] = best;
      }
    }
  }
  if (cache != nullptr) {
    cache->winner = std::move(winner);
    cache->in_freq = input.freq;
  }
  return out;
}

FeatureMaps maxpool_freq_backward(const FeatureMaps& grad_output, const PoolCache& cache) {
  const int C = grad_output.channels();
  const int T = grad_output.time;
  const int out_f = grad_output.freq;
  FeatureMaps g;
  g.freq = cache.in_freq;
  g.time = T;
  g.data = RowMatrix::Zero(C, static_cast<Eigen::Index>(cache.in_freq) * T);
  for (int c = 0; c < C; ++c)
    for (int m = 0; m < out_f; ++m)
      for (int t = 0; t < T; ++t) {
        const int src = cache.winner[(static_cast<std::size_t>(c) * out_f + m) * T + t];
        g.data(c, static_cast<Eigen::Index>(src) * T + t) += grad_output.data(c, static_cast<Eigen::Index>(m) * T + t);
      }
  return g;
}

RowMatrix stack_maps(const FeatureMaps& input) {
  // Row-major channel rows of freq*time are already the stacked layout.
  return Eigen::Map<const RowMatrix>(input.data.data(),
                                     static_cast<Eigen::Index>(input.channels()) * input.freq, input.time);
}

FeatureMaps unstack_maps(const RowMatrix& stacked, int channels) {
  if (channels <= 0 || stacked.rows() % channels != 0) throw ShapeError("cannot unstack rows into channels");
  FeatureMaps m;
  m.freq = static_cast<int>(stacked.rows() / channels);
  m.time = static_cast<int>(stacked.cols());
  m.data = Eigen::Map<const RowMatrix>(stacked.data(), channels, static_cast<Eigen::Index>(m.freq) * m.time);
  return m;
}

Matrix gru_forward(const Matrix& seq, const GruWeights& w, const Vector& h0, GruCache* cache) {
  const int d = w.hidden();
  const auto T = seq.cols();
  if (w.input.rows() != 3 * d || w.recurrent.rows() != 3 * d || w.input.cols() != seq.rows() ||
      w.bias.rows() != 3 * d || h0.size() != d) {
    throw ShapeError("GRU weight shapes do not match input");
  }
  Matrix proj = w.input * seq;
  proj.colwise() += w.bias.col(0);

  Matrix out(d, T);
  Matrix z(d, T), r(d, T), cand(d, T), hp(d, T), rh(d, T);
  Vector h = h0;
  Vector a_zr(2 * d), rhv(d), c(d);
  const auto U_zr = w.recurrent.topRows(2 * d);
  const auto U_c = w.recurrent.bottomRows(d);
  for (Eigen::Index t = 0; t < T; ++t) {
    a_zr.noalias() = U_zr * h;
    a_zr += proj.col(t).head(2 * d);
    for (int k = 0; k < 2 * d; ++k) a_zr[k] = sigmoid(a_zr[k]);
    rhv = a_zr.tail(d).cwiseProduct(h);
    c.noalias() = U_c * rhv;
    c += proj.col(t).tail(d);
    c = c.array().tanh();
    hp.col(t) = h;
    z.col(t) = a_zr.head(d);
    r.col(t) = a_zr.tail(d);
    rh.col(t) = rhv;
    cand.col(t) = c;
    h = (1.0 - a_zr.head(d).array()) * h.array() + a_zr.head(d).array() * c.array();
    out.col(t) = h;
  }
  if (cache != nullptr) {
    cache->input = seq;
    cache->update = std::move(z);
    cache->reset = std::move(r);
    cache->cand = std::move(cand);
    cache->h_prev = std::move(hp);
    cache->reset_h = std::move(rh);
    cache->output = out;
  }
  return out;
}

Matrix gru_backward(const Matrix& grad_output, const GruCache& cache, const GruWeights& w,
                    Matrix& grad_input, Matrix& grad_recurrent, Matrix& grad_bias) {
  const int d = w.hidden();
  const auto T = grad_output.cols();
  Matrix dA(3 * d, T);
  Vector dh_next = Vector::Zero(d);
  Vector dh(d), dz(d), dr(d), dc(d), d_rh(d), dh_prev(d);
  const auto U_zr = w.recurrent.topRows(2 * d);
  const auto U_c = w.recurrent.bottomRows(d);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto z = cache.update.col(t).array();
    const auto r = cache.reset.col(t).array();
    const auto c = cache.cand.col(t).array();
    const auto hp = cache.h_prev.col(t).array();
    dh = grad_output.col(t) + dh_next;
    dc = (dh.array() * z * (1.0 - c * c)).matrix();
    dz = (dh.array() * (c - hp) * z * (1.0 - z)).matrix();
    dh_prev = (dh.array() * (1.0 - z)).matrix();
    d_rh.noalias() = U_c.transpose() * dc;
    dr = (d_rh.array() * hp * r * (1.0 - r)).matrix();
    dh_prev += (d_rh.array() * r).matrix();
    dA.col(t).head(d) = dz;
    dA.col(t).segment(d, d) = dr;
    dA.col(t).tail(d) = dc;
    dh_prev.noalias() += U_zr.transpose() * dA.col(t).head(2 * d);
    dh_next = dh_prev;
  }
  grad_recurrent.topRows(2 * d).noalias() += dA.topRows(2 * d) * cache.h_prev.transpose();
  grad_recurrent.bottomRows(d).noalias() += dA.bottomRows(d) * cache.reset_h.transpose();
  grad_input.noalias() += dA * cache.input.transpose();
  grad_bias.col(0) += dA.rowwise().sum();
  return w.input.transpose() * dA;
}

}  // namespace disfluency::crnn
