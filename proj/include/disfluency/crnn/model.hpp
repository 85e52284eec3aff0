// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "disfluency/crnn/layers.hpp"
#include "disfluency/features.hpp"
#include "disfluency/rng.hpp"

namespace disfluency::crnn {

struct ConvSpec {
  int filters = 32;
  int kernel_freq = 8;
  int kernel_time = 8;
  int pool_freq = 5;
  double dropout = 0.25;
};

struct CrnnArch {
  FeatureKind input_kind = FeatureKind::mfcc;
  int input_bins = kMfccCoeffs;
  std::vector<ConvSpec> conv;
  int gru_layers = 3;
  int gru_hidden = 128;
  int fc_hidden = 100;
  double fc_dropout = 0.5;
  int classes = 2;

  /// conv1 32@(8,8) pool 5, conv2 64@(4,4) pool 4 on 40 MFCC bins.
  static CrnnArch mfcc_default();
  /// Same convolutions, pools 8 then 4 on 128 log-mel bands.
  static CrnnArch log_mel_default();
  static CrnnArch for_kind(FeatureKind kind);

  /// M', the frequency size left after all pools.
  int pooled_bins() const;
  /// F * M', the per-frame input size of the first recurrent layer.
  int stacked_dim() const;
  void validate() const;
};

bool operator==(const ConvSpec& a, const ConvSpec& b);
bool operator==(const CrnnArch& a, const CrnnArch& b);

/// All learnable tensors in declared order:
///   per conv layer: weight, bias; per GRU layer: input, recurrent, bias;
///   fc1 weight, fc1 bias, fc2 weight, fc2 bias.
struct CrnnModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  CrnnArch arch;
  std::vector<Matrix> params;
  std::vector<std::string> names;
  /// Per-bin standardization applied to raw features before the network.
  Vector input_mean;
  Vector input_scale;
  int seq_len = 128;
  std::uint64_t rng_seed = 0;

  /// Glorot-uniform weights, zero biases, identity input normalization.
  static CrnnModel initialize(const CrnnArch& arch, std::uint64_t seed);

  std::size_t conv_weight(std::size_t layer) const { return 2 * layer; }
  std::size_t conv_bias(std::size_t layer) const { return 2 * layer + 1; }
  std::size_t gru_input(std::size_t layer) const { return 2 * arch.conv.size() + 3 * layer; }
  std::size_t gru_recurrent(std::size_t layer) const { return gru_input(layer) + 1; }
  std::size_t gru_bias(std::size_t layer) const { return gru_input(layer) + 2; }
  std::size_t fc1_weight() const { return 2 * arch.conv.size() + 3 * static_cast<std::size_t>(arch.gru_layers); }
  std::size_t fc1_bias() const { return fc1_weight() + 1; }
  std::size_t fc2_weight() const { return fc1_weight() + 2; }
  std::size_t fc2_bias() const { return fc1_weight() + 3; }

  GruWeights gru(std::size_t layer) const;
  std::size_t parameter_count() const;
  double squared_norm() const;
  void check_finite() const;
};

/// Intermediate values kept for the backward pass of one window.
struct ForwardCache {
  FeatureMaps input;
  std::vector<ConvCache> conv;
  std::vector<PoolCache> pool;
  std::vector<RowMatrix> conv_dropout;  // inverted-dropout masks per conv block
  std::vector<GruCache> gru;
  Matrix fc1_out;         // post-ReLU, before dropout
  Matrix fc1_dropped;     // after dropout, fed to fc2
  RowMatrix fc1_mask;
  Matrix probs;           // K x T
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training
};

/// Runs the network on one already-normalized C x T window and returns K x T
/// class probabilities (softmax per column).
Matrix forward_window(const CrnnModel& model, const RowMatrix& input, const ForwardOptions& opts = {},
                      ForwardCache* cache = nullptr);

/// Standardizes raw features with the model statistics.
RowMatrix normalize_input(const CrnnModel& model, const RowMatrix& raw);

/// Inference over a whole track: normalized, cut into seq_len windows (the
/// last one zero-padded) and re-joined. Returns K x T.
Matrix forward(const CrnnModel& model, const FeatureMatrix& feats, bool training = false, Rng* rng = nullptr);

/// Versioned binary checkpoint: "DFCKPT01", u32 kind (1 = crnn), u32 version,
/// arch descriptor, normalization vectors, then every tensor as rows, cols
/// and row-major f64 values in declared order.
void save_model(const CrnnModel& model, const std::filesystem::path& path);
CrnnModel load_model(const std::filesystem::path& path);
std::vector<unsigned char> serialize_model(const CrnnModel& model);
CrnnModel deserialize_model(std::vector<unsigned char> bytes);

}  // namespace disfluency::crnn
