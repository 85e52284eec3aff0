// SPDX-License-Identifier: Apache-2.0
#include "disfluency/crnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "disfluency/crnn/detect.hpp"
#include "disfluency/errors.hpp"

namespace disfluency {

RowMatrix FrameLabels::one_hot(int num_classes) const {
  RowMatrix m = RowMatrix::Zero(num_classes, static_cast<Eigen::Index>(classes.size()));
  for (std::size_t t = 0; t < classes.size(); ++t) m(classes[t], static_cast<Eigen::Index>(t)) = 1.0;
  return m;
}

std::size_t FrameLabels::count(int cls) const {
  return static_cast<std::size_t>(std::count(classes.begin(), classes.end(), cls));
}

}  // namespace disfluency

namespace disfluency::crnn {

namespace {

double weight_at(std::span<const double> w, Eigen::Index t) {
  return w.empty() ? 1.0 : w[static_cast<std::size_t>(t)];
}

void check_labels(const Matrix& probs, std::span<const int> labels, std::span<const double> w) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.cols()) throw ShapeError("label count != frame count");
  if (!w.empty() && w.size() != labels.size()) throw ShapeError("frame weight count != frame count");
}

}  // namespace

double cross_entropy(const Matrix& probs, std::span<const int> labels, std::span<const double> frame_weight) {
  check_labels(probs, labels, frame_weight);
  double l = 0.0;
  for (Eigen::Index t = 0; t < probs.cols(); ++t) {
    const double w = weight_at(frame_weight, t);
    if (w == 0.0) continue;
    const double p = std::clamp(probs(labels[static_cast<std::size_t>(t)], t), kProbFloor, 1.0);
    l -= w * std::log(p);
  }
  return l;
}

double loss(const Matrix& probs, std::span<const int> labels, const CrnnModel& model, double lambda,
            std::span<const double> frame_weight) {
  return cross_entropy(probs, labels, frame_weight) + lambda * model.squared_norm();
}

Gradients backward(const CrnnModel& model, const ForwardCache& cache, std::span<const int> labels, double lambda,
                   std::span<const double> frame_weight) {
  const auto& arch = model.arch;
  check_labels(cache.probs, labels, frame_weight);
  Gradients g;
  g.reserve(model.params.size());
  for (const auto& p : model.params) g.push_back(Matrix::Zero(p.rows(), p.cols()));

  Matrix dlogits = cache.probs;
  for (Eigen::Index t = 0; t < dlogits.cols(); ++t) {
    dlogits(labels[static_cast<std::size_t>(t)], t) -= 1.0;
    dlogits.col(t) *= weight_at(frame_weight, t);
  }
  g[model.fc2_weight()].noalias() = dlogits * cache.fc1_dropped.transpose();
  g[model.fc2_bias()].col(0) = dlogits.rowwise().sum();

  Matrix dfc1 = model.params[model.fc2_weight()].transpose() * dlogits;
  if (cache.fc1_mask.size() > 0) dfc1.array() *= cache.fc1_mask.array();
  dfc1 = (cache.fc1_out.array() > 0.0).select(dfc1.array(), 0.0).matrix();
  const Matrix& top = cache.gru.back().output;
  g[model.fc1_weight()].noalias() = dfc1 * top.transpose();
  g[model.fc1_bias()].col(0) = dfc1.rowwise().sum();

  Matrix dseq = model.params[model.fc1_weight()].transpose() * dfc1;
  for (int l = arch.gru_layers - 1; l >= 0; --l) {
    const auto layer = static_cast<std::size_t>(l);
    dseq = gru_backward(dseq, cache.gru[layer], model.gru(layer), g[model.gru_input(layer)],
                        g[model.gru_recurrent(layer)], g[model.gru_bias(layer)]);
  }

  if (!arch.conv.empty()) {
    FeatureMaps dx = unstack_maps(RowMatrix(dseq), arch.conv.back().filters);
    for (std::size_t i = arch.conv.size(); i-- > 0;) {
      const auto& spec = arch.conv[i];
      if (cache.conv_dropout[i].size() > 0) dx.data.array() *= cache.conv_dropout[i].array();
      dx = maxpool_freq_backward(dx, cache.pool[i]);
      dx = conv_backward(dx, cache.conv[i], model.params[model.conv_weight(i)], spec.kernel_freq,
                         spec.kernel_time, g[model.conv_weight(i)], g[model.conv_bias(i)], i > 0);
    }
  }

  if (lambda != 0.0) {
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += 2.0 * lambda * model.params[k];
  }
  return g;
}

AdagradState AdagradState::zeros_like(const std::vector<Matrix>& params) {
  AdagradState s;
  for (const auto& p : params) s.accumulators.push_back(Matrix::Zero(p.rows(), p.cols()));
  return s;
}

void adagrad_step(std::vector<Matrix>& params, const Gradients& grads, AdagradState& state, double lr,
                  double eps) {
  if (grads.size() != params.size() || state.accumulators.size() != params.size()) {
    throw ShapeError("gradient/state count does not match parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& acc = state.accumulators[k];
    acc.array() += grads[k].array().square();
    params[k].array() -= lr * grads[k].array() / (acc.array() + eps).sqrt();
  }
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || l2_lambda < 0.0 || epochs < 1 || seq_len < 1 || !(adagrad_eps > 0.0)) {
    throw SpecError("training config values must be positive");
  }
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw SpecError("validation fraction must be in [0, 1)");
  }
  if (patience < 0) throw SpecError("patience must be nonnegative");
}

namespace {

struct Window {
  RowMatrix input;
  std::vector<int> labels;
  std::vector<double> weight;
  std::size_t scored = 0;
};

void add_windows(const RowMatrix& x, const FrameLabels& y, int seq_len, std::vector<Window>& out) {
  const Eigen::Index T = x.cols();
  for (Eigen::Index start = 0; start < T; start += seq_len) {
    const Eigen::Index n = std::min<Eigen::Index>(seq_len, T - start);
    Window w;
    w.input = RowMatrix::Zero(x.rows(), seq_len);
    w.input.leftCols(n) = x.middleCols(start, n);
    w.labels.assign(static_cast<std::size_t>(seq_len), kNonFiller);
    w.weight.assign(static_cast<std::size_t>(seq_len), 0.0);
    for (Eigen::Index t = 0; t < n; ++t) {
      w.labels[static_cast<std::size_t>(t)] = y.classes[static_cast<std::size_t>(start + t)];
      w.weight[static_cast<std::size_t>(t)] = 1.0;
    }
    w.scored = static_cast<std::size_t>(n);
    out.push_back(std::move(w));
  }
}

}  // namespace

TrainResult train(std::span<const TrainingExample> corpus, const CrnnArch& arch, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (corpus.empty()) throw EmptyDataset("training corpus is empty");
  cfg.validate();
  arch.validate();
  for (const auto& ex : corpus) {
    if (ex.features.kind != arch.input_kind) throw ShapeError("corpus feature kind does not match architecture");
    if (ex.features.bins() != arch.input_bins) throw ShapeError("corpus feature bins do not match architecture");
    if (static_cast<Eigen::Index>(ex.labels.size()) != ex.features.frames()) {
      throw ShapeError("labels and features differ in frame count");
    }
  }

  Rng rng(mix_seed(cfg.seed, 0x7A));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t n_val = 0;
  if (cfg.validation_fraction > 0.0 && corpus.size() >= 2) {
    n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(corpus.size() * cfg.validation_fraction)));
  }
  const std::vector<std::size_t> val_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> train_ids(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  CrnnModel model = CrnnModel::initialize(arch, cfg.seed);
  model.seq_len = cfg.seq_len;

  // Per-bin standardization from training frames.
  const Eigen::Index C = arch.input_bins;
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(C), sq = Eigen::ArrayXd::Zero(C);
  double frames = 0.0;
  for (std::size_t id : train_ids) {
    const auto& v = corpus[id].features.values;
    sum += v.rowwise().sum().array();
    sq += v.array().square().rowwise().sum();
    frames += static_cast<double>(v.cols());
  }
  if (frames == 0.0) throw EmptyDataset("training tracks hold no frames");
  const Eigen::ArrayXd mean = sum / frames;
  const Eigen::ArrayXd var = (sq / frames - mean.square()).max(0.0);
  model.input_mean = mean.matrix();
  model.input_scale = (var.sqrt() > 1e-8).select(1.0 / var.sqrt(), 1.0).matrix();

  std::vector<Window> train_windows, val_windows;
  for (std::size_t id : train_ids) {
    add_windows(normalize_input(model, corpus[id].features.values), corpus[id].labels, cfg.seq_len, train_windows);
  }
  for (std::size_t id : val_ids) {
    add_windows(normalize_input(model, corpus[id].features.values), corpus[id].labels, cfg.seq_len, val_windows);
  }

  AdagradState state = AdagradState::zeros_like(model.params);
  TrainResult result;
  std::vector<Matrix> best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> window_order(train_windows.size());
  std::iota(window_order.begin(), window_order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(window_order);
    double train_nll = 0.0;
    double train_frames = 0.0;
    ForwardCache cache;
    for (std::size_t wi : window_order) {
      const auto& w = train_windows[wi];
      forward_window(model, w.input, ForwardOptions{true, &rng}, &cache);
      train_nll += cross_entropy(cache.probs, w.labels, w.weight);
      train_frames += static_cast<double>(w.scored);
      const Gradients g = backward(model, cache, w.labels, cfg.l2_lambda, w.weight);
      adagrad_step(model.params, g, state, cfg.lr, cfg.adagrad_eps);
    }
    model.check_finite();

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_frames > 0.0 ? train_nll / train_frames : 0.0;
    if (!val_windows.empty()) {
      double nll = 0.0;
      double n = 0.0;
      FrameLabels pred, gold;
      for (const auto& w : val_windows) {
        const Matrix p = forward_window(model, w.input);
        nll += cross_entropy(p, w.labels, w.weight);
        n += static_cast<double>(w.scored);
        const FrameLabels am = argmax_frames(p);
        pred.classes.insert(pred.classes.end(), am.classes.begin(), am.classes.begin() + static_cast<std::ptrdiff_t>(w.scored));
        gold.classes.insert(gold.classes.end(), w.labels.begin(), w.labels.begin() + static_cast<std::ptrdiff_t>(w.scored));
      }
      stats.val_loss = nll / n;
      stats.val_f1 = evaluate_frames(pred, gold).f1;
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (val_windows.empty()) {
      result.best_epoch = epoch;
      continue;
    }
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best_params = model.params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  if (!val_windows.empty()) model.params = std::move(best_params);
  result.model = std::move(model);
  return result;
}

}  // namespace disfluency::crnn
