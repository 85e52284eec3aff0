// SPDX-License-Identifier: Apache-2.0
#include "disfluency/silence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "disfluency/binary_io.hpp"
#include "disfluency/errors.hpp"
#include "disfluency/features.hpp"
#include "disfluency/rng.hpp"

namespace disfluency {

std::string_view to_string(SilenceLabel l) { return l == SilenceLabel::disfluent ? "disfluent" : "fluent"; }

std::string_view to_string(ClassifierKind k) { return k == ClassifierKind::linear_svm ? "svm" : "logreg"; }

ClassifierKind classifier_kind_from_string(std::string_view s) {
  if (s == "logreg") return ClassifierKind::logreg;
  if (s == "svm" || s == "linear_svm") return ClassifierKind::linear_svm;
  throw SpecError("unknown classifier kind '" + std::string(s) + "'");
}

std::vector<double> frame_energy_db(const AudioClip& clip) {
  const FrameGeometry g = FrameGeometry::for_rate(clip.sample_rate());
  const std::size_t T = frame_count(clip.size(), g);
  std::vector<double> out(T);
  const double* x = clip.data().data();
  for (std::size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    const double* f = x + t * static_cast<std::size_t>(g.hop);
    for (int i = 0; i < g.frame_len; ++i) acc += f[i] * f[i];
    out[t] = 20.0 * std::log10(std::sqrt(acc / g.frame_len) + 1e-10);
  }
  return out;
}

double silence_threshold_db(std::span<const double> energy_db, const SilenceDetectorConfig& cfg) {
  if (energy_db.empty()) return cfg.absolute_floor_dbfs;
  std::vector<double> sorted(energy_db.begin(), energy_db.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = cfg.floor_percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double floor_db = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  const double thr = std::max(floor_db + cfg.floor_margin_db, cfg.absolute_floor_dbfs);
  return std::min(thr, sorted.back() - cfg.min_contrast_db);
}

namespace {

constexpr double kDigitalZeroDb = -199.0;

// Centered sliding RMS test at sample resolution.
class LocalEnergy {
 public:
  LocalEnergy(const AudioClip& clip, double width_s, double thr_db)
      : n_(clip.size()), half_(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(width_s * clip.sample_rate() / 2)))) {
    prefix_.resize(n_ + 1, 0.0);
    for (std::size_t i = 0; i < n_; ++i) prefix_[i + 1] = prefix_[i] + clip.data()[i] * clip.data()[i];
    const double amp = std::pow(10.0, thr_db / 20.0);
    thr_sq_ = amp * amp;
  }

  bool loud(std::size_t p) const {
    const std::size_t lo = p > half_ ? p - half_ : 0;
    const std::size_t hi = std::min(n_, p + half_ + 1);
    const double sum = prefix_[hi] - prefix_[lo];
    if (sum <= 0.0) return false;
    return sum / static_cast<double>(hi - lo) >= thr_sq_;
  }

 private:
  std::size_t n_;
  std::size_t half_;
  std::vector<double> prefix_;
  double thr_sq_ = 0.0;
};

}  // namespace

std::vector<SilenceSpan> detect_silences(const AudioClip& clip, const SilenceDetectorConfig& cfg) {
  const FrameGeometry g = FrameGeometry::for_rate(clip.sample_rate());
  const std::vector<double> energy = frame_energy_db(clip);
  if (energy.empty()) throw TooShort("clip shorter than one analysis frame");
  const double thr = silence_threshold_db(energy, cfg);
  const std::size_t T = energy.size();
  const std::size_t N = clip.size();
  const auto hop = static_cast<std::size_t>(g.hop);
  const auto len = static_cast<std::size_t>(g.frame_len);
  const LocalEnergy local(clip, cfg.edge_window_s, thr);

  auto quiet = [&](std::size_t t) { return energy[t] < thr || energy[t] <= kDigitalZeroDb; };

  std::vector<std::pair<std::size_t, std::size_t>> spans;  // sample [begin, end)
  for (std::size_t t = 0; t < T;) {
    if (!quiet(t)) {
      ++t;
      continue;
    }
    const std::size_t a = t;
    while (t < T && quiet(t)) ++t;
    const std::size_t b = t - 1;

    std::size_t begin = 0;
    if (a > 0) {
      const std::size_t s0 = a * hop;
      const std::size_t lo = s0 - hop;
      const std::size_t hi = std::min(N, s0 + len);
      begin = lo;
      for (std::size_t p = hi; p-- > lo;) {
        if (local.loud(p)) {
          begin = p + 1;
          break;
        }
      }
    }
    std::size_t end = N;
    if (b + 1 < T) {
      const std::size_t e0 = std::min(N, b * hop + len);
      const std::size_t lo = e0 - len;
      const std::size_t hi = std::min(N, e0 + hop);
      end = hi;
      for (std::size_t p = lo; p < hi; ++p) {
        if (local.loud(p)) {
          end = p;
          break;
        }
      }
    }
    if (end > begin) spans.emplace_back(begin, end);
  }

  const auto merge_gap = static_cast<std::size_t>(std::lround(cfg.merge_gap_s * clip.sample_rate()));
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second + merge_gap - (merge_gap > 0 ? 1 : 0)) {
      merged.back().second = std::max(merged.back().second, s.second);
    } else {
      merged.push_back(s);
    }
  }

  std::vector<SilenceSpan> out;
  const double sr = clip.sample_rate();
  for (const auto& [b, e] : merged) {
    const double dur = static_cast<double>(e - b) / sr;
    if (dur + 1e-12 < cfg.min_silence_s) continue;
    out.push_back({static_cast<double>(b) / sr, static_cast<double>(e) / sr, kDefaultContextS});
  }
  return out;
}

SilenceLabel heuristic_label(const SilenceSpan& span, bool inside_disfluent_segment) {
  if (inside_disfluent_segment || span.duration_s() > kDisfluentPauseS) return SilenceLabel::disfluent;
  return SilenceLabel::fluent;
}

SilenceFeature build_feature(const AudioClip& clip, const SilenceSpan& span, double window_s) {
  if (window_s < 0.8 - 1e-12 || window_s > 1.0 + 1e-12) throw SpecError("context window must lie in [0.8, 1.0] s");
  const std::size_t b = clip.index_at(span.start_s - window_s);
  const std::size_t e = clip.index_at(span.end_s + window_s);
  SilenceFeature f;
  const AudioClip seg = clip.slice(b, e);
  const FrameGeometry g = FrameGeometry::for_rate(clip.sample_rate());
  if (frame_count(seg.size(), g) == 0) return f;
  const FeatureMatrix m = mean_over_frequency(mfcc(seg));
  const auto n = std::min<Eigen::Index>(kSilenceFeatureLen, m.frames());
  f.values.head(n) = m.values.row(0).head(n).transpose();
  f.true_len = static_cast<int>(n);
  return f;
}

ClassifierParams ClassifierParams::defaults(ClassifierKind kind) {
  return kind == ClassifierKind::linear_svm ? ClassifierParams{10.0, 1500} : ClassifierParams{10.0, 100};
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Standardized {
  Eigen::MatrixXd z;  // n x p
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // divide by
};

Standardized standardize(std::span<const LabeledFeature> data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd x(n, kSilenceFeatureLen);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = data[static_cast<std::size_t>(i)].feature.values.transpose();
  Standardized s;
  s.mean = x.colwise().mean().transpose();
  s.z = x.rowwise() - s.mean.transpose();
  s.scale = (s.z.array().square().colwise().sum() / static_cast<double>(n)).sqrt().transpose();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (s.scale[j] < 1e-12) s.scale[j] = 1.0;
  }
  s.z = s.z.array().rowwise() / s.scale.transpose().array();
  return s;
}

double lipschitz_gram(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd aug(z.rows(), z.cols() + 1);
  aug << z, Eigen::VectorXd::Ones(z.rows());
  const Eigen::MatrixXd gram = aug.transpose() * aug;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

SilenceClassifier train_classifier(std::span<const LabeledFeature> data, ClassifierKind kind) {
  return train_classifier(data, kind, ClassifierParams::defaults(kind));
}

SilenceClassifier train_classifier(std::span<const LabeledFeature> data, ClassifierKind kind,
                                   const ClassifierParams& params) {
  if (data.empty()) throw EmptyDataset("no silence examples");
  if (!(params.c > 0.0) || params.iterations < 1) throw SpecError("classifier C and iterations must be positive");
  const auto positives = std::count_if(data.begin(), data.end(),
                                       [](const LabeledFeature& d) { return d.label == SilenceLabel::disfluent; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(data.size())) {
    throw DegenerateDataset("silence examples hold a single class");
  }
  const Standardized s = standardize(data);
  const auto n = static_cast<double>(data.size());
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = data[i].label == SilenceLabel::disfluent ? 1.0 : 0.0;
  }
  const double reg = 1.0 / (params.c * n);
  const double gram_max = lipschitz_gram(s.z);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(kSilenceFeatureLen);
  double b = 0.0;
  if (kind == ClassifierKind::logreg) {
    const double step = 1.0 / (gram_max / (4.0 * n) + reg);
    for (int it = 0; it < params.iterations; ++it) {
      Eigen::VectorXd r = (s.z * w).array() + b;
      for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = sigmoid(r[i]) - y[i];
      const Eigen::VectorXd gw = s.z.transpose() * r / n + reg * w;
      const double gb = r.sum() / n;
      w -= step * gw;
      b -= step * gb;
    }
  } else {
    const Eigen::VectorXd ys = 2.0 * y.array() - 1.0;
    auto objective = [&](const Eigen::VectorXd& wv, double bv) {
      const Eigen::ArrayXd m = ys.array() * ((s.z * wv).array() + bv);
      return (1.0 - m).max(0.0).sum() / n + 0.5 * reg * wv.squaredNorm();
    };
    const double eta0 = 1.0 / std::sqrt(gram_max / n + reg);
    Eigen::VectorXd best_w = w;
    double best_b = b;
    double best_obj = objective(w, b);
    for (int it = 1; it <= params.iterations; ++it) {
      const Eigen::ArrayXd m = ys.array() * ((s.z * w).array() + b);
      Eigen::VectorXd coef = Eigen::VectorXd::Zero(ys.size());
      for (Eigen::Index i = 0; i < ys.size(); ++i) {
        if (m[i] < 1.0) coef[i] = -ys[i];
      }
      const Eigen::VectorXd gw = s.z.transpose() * coef / n + reg * w;
      const double gb = coef.sum() / n;
      const double eta = eta0 / std::sqrt(static_cast<double>(it));
      w -= eta * gw;
      b -= eta * gb;
      const double obj = objective(w, b);
      if (obj < best_obj) {
        best_obj = obj;
        best_w = w;
        best_b = b;
      }
    }
    w = best_w;
    b = best_b;
  }

  SilenceClassifier clf;
  clf.kind = kind;
  clf.params = params;
  clf.weights = w.array() / s.scale.array();
  clf.bias = b - clf.weights.dot(s.mean);
  if (!clf.weights.allFinite() || !std::isfinite(clf.bias)) throw Error("silence classifier diverged");
  return clf;
}

SilenceDecision classify(const SilenceClassifier& clf, const SilenceFeature& f) {
  SilenceDecision d;
  d.score = sigmoid(clf.weights.dot(f.values) + clf.bias);
  d.label = d.score >= 0.5 ? SilenceLabel::disfluent : SilenceLabel::fluent;
  return d;
}

ClassificationScores score_labels(std::span<const SilenceLabel> predicted, std::span<const SilenceLabel> reference) {
  if (predicted.size() != reference.size()) throw ShapeError("prediction and reference counts differ");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == SilenceLabel::disfluent;
    const bool r = reference[i] == SilenceLabel::disfluent;
    tp += p && r;
    fp += p && !r;
    fn += !p && r;
    correct += p == r;
  }
  ClassificationScores s;
  s.count = predicted.size();
  s.accuracy = s.count ? static_cast<double>(correct) / static_cast<double>(s.count) : 1.0;
  if (tp + fp + fn == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

ClassificationScores cross_validate(std::span<const LabeledFeature> data, ClassifierKind kind,
                                    const ClassifierParams& params, int folds, std::uint64_t seed) {
  if (folds < 2) throw SpecError("cross-validation needs at least two folds");
  if (data.size() < static_cast<std::size_t>(folds)) throw EmptyDataset("fewer examples than folds");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<SilenceLabel> predicted(data.size()), reference(data.size());
  for (int f = 0; f < folds; ++f) {
    std::vector<LabeledFeature> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (static_cast<int>(i % static_cast<std::size_t>(folds)) == f) test.push_back(order[i]);
      else train.push_back(data[order[i]]);
    }
    const SilenceClassifier clf = train_classifier(train, kind, params);
    for (std::size_t id : test) {
      predicted[id] = classify(clf, data[id].feature).label;
      reference[id] = data[id].label;
    }
  }
  return score_labels(predicted, reference);
}

void save_classifier(const SilenceClassifier& clf, const std::filesystem::path& path) {
  ByteWriter w;
  write_checkpoint_header(w, CheckpointKind::silence_classifier, SilenceClassifier::kFormatVersion);
  w.u32(static_cast<std::uint32_t>(clf.kind));
  w.f64(clf.params.c);
  w.u32(static_cast<std::uint32_t>(clf.params.iterations));
  w.f64(clf.window_s);
  w.matrix(clf.weights);
  w.f64(clf.bias);
  w.save(path);
}

SilenceClassifier load_classifier(const std::filesystem::path& path) {
  ByteReader r = ByteReader::load(path);
  read_checkpoint_header(r, CheckpointKind::silence_classifier, SilenceClassifier::kFormatVersion);
  SilenceClassifier clf;
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw ParseError("unknown classifier kind in checkpoint");
  clf.kind = static_cast<ClassifierKind>(kind);
  clf.params.c = r.f64();
  clf.params.iterations = static_cast<int>(r.u32());
  clf.window_s = r.f64();
  const Eigen::MatrixXd wm = r.matrix();
  if (wm.rows() != kSilenceFeatureLen || wm.cols() != 1) throw ParseError("classifier weights have the wrong shape");
  clf.weights = wm.col(0);
  clf.bias = r.f64();
  if (!r.at_end()) throw ParseError("trailing bytes in classifier checkpoint");
  if (!clf.weights.allFinite() || !std::isfinite(clf.bias)) throw ParseError("non-finite classifier weights");
  return clf;
}

}  // namespace disfluency
