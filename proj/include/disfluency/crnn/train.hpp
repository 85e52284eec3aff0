// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "disfluency/crnn/model.hpp"
#include "disfluency/frame_labels.hpp"

namespace disfluency::crnn {

using Gradients = std::vector<Matrix>;

inline constexpr double kProbFloor = 1e-12;

/// -sum_t w_t log P(y_t) + lambda * ||theta||^2, probabilities clipped to
/// [1e-12, 1]. frame_weight is 1 for scored frames and 0 for padding; an
/// empty span scores every frame.
double loss(const Matrix& probs, std::span<const int> labels, const CrnnModel& model, double lambda,
            std::span<const double> frame_weight = {});

/// Data term only, without the regularizer.
double cross_entropy(const Matrix& probs, std::span<const int> labels, std::span<const double> frame_weight = {});

/// Exact gradient of loss() for the window captured in `cache`, including the
/// 2 * lambda * theta regularizer term. Dropout masks are taken from the cache.
Gradients backward(const CrnnModel& model, const ForwardCache& cache, std::span<const int> labels, double lambda,
                   std::span<const double> frame_weight = {});

struct AdagradState {
  std::vector<Matrix> accumulators;
  static AdagradState zeros_like(const std::vector<Matrix>& params);
};

/// acc += g^2; theta -= lr * g / sqrt(acc + eps).
void adagrad_step(std::vector<Matrix>& params, const Gradients& grads, AdagradState& state, double lr,
                  double eps = 1e-8);

struct TrainConfig {
  double lr = 0.01;
  double l2_lambda = 0.01;
  int epochs = 200;
  int seq_len = 128;
  double adagrad_eps = 1e-8;
  std::uint64_t seed = 1;
  /// Fraction of tracks held out for checkpoint selection.
  double validation_fraction = 0.1;
  /// Stop after this many epochs without a validation-loss improvement;
  /// 0 runs every epoch.
  int patience = 0;
  void validate() const;
};

struct TrainingExample {
  FeatureMatrix features;
  FrameLabels labels;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-frame cross-entropy
  double val_loss = 0.0;    // mean per-frame cross-entropy on held-out tracks
  double val_f1 = 0.0;      // frame-level filler F1 on held-out tracks
  double seconds = 0.0;
};

struct TrainResult {
  CrnnModel model;
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Slices every track into non-overlapping seq_len windows (the last one
/// zero-padded, its padding excluded from the loss), trains with per-window
/// AdaGrad steps in a freshly shuffled order each epoch and returns the
/// parameters with the lowest validation loss. With no validation tracks the
/// final parameters are returned. Deterministic for a fixed seed.
TrainResult train(std::span<const TrainingExample> corpus, const CrnnArch& arch, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace disfluency::crnn
