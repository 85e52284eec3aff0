// SPDX-License-Identifier: Apache-2.0
#include "disfluency/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "disfluency/errors.hpp"

namespace disfluency {

double speech_rate(std::size_t syllables, double total_time_s, std::span<const double> pauses) {
  double short_pauses = 0.0;
  for (double p : pauses) {
    if (p < kArticulationPauseS) short_pauses += p;
  }
  const double denom = total_time_s - short_pauses;
  if (!(denom > 0.0)) throw MetricError("speech rate denominator is not positive");
  return static_cast<double>(syllables) / denom * 60.0;
}

double articulation_rate(std::size_t syllables, double total_time_s) {
  if (!(total_time_s > 0.0)) throw MetricError("total time must be positive");
  return static_cast<double>(syllables) / total_time_s * 60.0;
}

double phonation_time_ratio(double speaking_time_s, double total_time_s) {
  if (!(total_time_s > 0.0)) throw MetricError("total time must be positive");
  if (speaking_time_s < -1e-9 || speaking_time_s > total_time_s + 1e-9) {
    throw MetricError("speaking time outside [0, total]");
  }
  return std::clamp(speaking_time_s / total_time_s, 0.0, 1.0);
}

double mean_length_runs(std::size_t syllables, std::span<const double> pauses) {
  const auto runs = 1 + std::count_if(pauses.begin(), pauses.end(), [](double p) { return p > kRunPauseS; });
  return static_cast<double>(syllables) / static_cast<double>(runs);
}

double mean_length_pauses(std::span<const double> pauses) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double p : pauses) {
    if (p > kCountedPauseS) {
      sum += p;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double filled_pauses_per_min(std::size_t filler_count, double total_time_s) {
  if (!(total_time_s > 0.0)) throw MetricError("total time must be positive");
  return static_cast<double>(filler_count) / (total_time_s / 60.0);
}

FluencyReport make_report(const FluencyInputs& in) {
  FluencyReport r;
  r.inputs = in;
  r.sr = speech_rate(in.syllables, in.total_time_s, in.pauses);
  r.ar = articulation_rate(in.syllables, in.total_time_s);
  r.ptr = phonation_time_ratio(in.speaking_time_s, in.total_time_s);
  r.mlr = mean_length_runs(in.syllables, in.pauses);
  r.mlp = mean_length_pauses(in.pauses);
  r.fpm = filled_pauses_per_min(in.filled_pauses, in.total_time_s);
  return r;
}

namespace {

// RBJ cookbook biquad, direct form I.
class Biquad {
 public:
  static Biquad lowpass(double fc, double fs) { return make(fc, fs, false); }
  static Biquad highpass(double fc, double fs) { return make(fc, fs, true); }

  void run(std::vector<double>& x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : x) {
      const double y = b0_ * v + b1_ * x1 + b2_ * x2 - a1_ * y1 - a2_ * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }

 private:
  static Biquad make(double fc, double fs, bool high) {
    const double w0 = 2.0 * std::numbers::pi * std::min(fc, 0.49 * fs) / fs;
    const double q_factor = 1.0 / std::numbers::sqrt2;
    const double alpha = std::sin(w0) / (2.0 * q_factor);
    const double c = std::cos(w0);
    Biquad q;
    const double a0 = 1.0 + alpha;
    if (high) {
      q.b0_ = (1.0 + c) / 2.0 / a0;
      q.b1_ = -(1.0 + c) / a0;
    } else {
      q.b0_ = (1.0 - c) / 2.0 / a0;
      q.b1_ = (1.0 - c) / a0;
    }
    q.b2_ = q.b0_;
    q.a1_ = -2.0 * c / a0;
    q.a2_ = (1.0 - alpha) / a0;
    return q;
  }
  double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
};

}  // namespace

std::size_t count_syllables(const AudioClip& clip, std::span<const TimeSpan> speech_spans, const SyllableConfig& cfg) {
  if (clip.empty() || speech_spans.empty()) return 0;
  const double fs = clip.sample_rate();
  std::vector<double> x = clip.data();
  Biquad::highpass(cfg.low_hz, fs).run(x);
  Biquad::lowpass(cfg.high_hz, fs).run(x);

  const auto win = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.window_s * fs)));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.hop_s * fs)));
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
  const std::size_t n_env = x.size() / hop + 1;
  std::vector<double> raw(n_env, 0.0);
  for (std::size_t k = 0; k < n_env; ++k) {
    const std::size_t c = k * hop;
    const std::size_t lo = c > win / 2 ? c - win / 2 : 0;
    const std::size_t hi = std::min(x.size(), c + win / 2 + 1);
    if (hi > lo) raw[k] = std::sqrt((prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo));
  }
  std::vector<double> env(n_env, 0.0);
  for (std::size_t k = 0; k < n_env; ++k) {
    const double l = raw[k > 0 ? k - 1 : k];
    const double r = raw[k + 1 < n_env ? k + 1 : k];
    env[k] = 0.25 * l + 0.5 * raw[k] + 0.25 * r;
  }

  const auto min_sep = static_cast<std::size_t>(std::lround(cfg.min_separation_s / cfg.hop_s));
  std::size_t total = 0;
  for (const auto& span : speech_spans) {
    const auto k0 = static_cast<std::size_t>(std::ceil(span.start_s * fs / static_cast<double>(hop)));
    const auto k1 = std::min(n_env, static_cast<std::size_t>(std::floor(span.end_s * fs / static_cast<double>(hop))) + 1);
    if (k1 <= k0 + 2) continue;
    const double peak = *std::max_element(env.begin() + static_cast<std::ptrdiff_t>(k0),
                                          env.begin() + static_cast<std::ptrdiff_t>(k1));
    if (!(peak > 0.0)) continue;
    std::vector<std::size_t> cand;
    for (std::size_t k = k0; k < k1; ++k) {
      const double left = k > k0 ? env[k - 1] : -1.0;
      const double right = k + 1 < k1 ? env[k + 1] : -1.0;
      if (env[k] > left && env[k] >= right && env[k] >= cfg.rel_threshold * peak) cand.push_back(k);
    }
    std::vector<std::size_t> by_height = cand;
    std::stable_sort(by_height.begin(), by_height.end(), [&](std::size_t a, std::size_t b) { return env[a] > env[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t k : by_height) {
      bool clear = true;
      for (std::size_t q : kept) {
        if ((k > q ? k - q : q - k) < min_sep) {
          clear = false;
          break;
        }
      }
      if (clear) kept.push_back(k);
    }
    std::sort(kept.begin(), kept.end());
    bool merged = true;
    while (merged && kept.size() > 1) {
      merged = false;
      for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
        const std::size_t p = kept[i], q = kept[i + 1];
        const double valley = *std::min_element(env.begin() + static_cast<std::ptrdiff_t>(p),
                                                env.begin() + static_cast<std::ptrdiff_t>(q) + 1);
        if (valley > cfg.valley_ratio * std::min(env[p], env[q])) {
          kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(env[p] >= env[q] ? i + 1 : i));
          merged = true;
          break;
        }
      }
    }
    total += kept.size();
  }
  return total;
}

FluencyReport measure(const AudioClip& clip, std::size_t filled_pauses, const std::vector<SilenceSpan>* silences) {
  std::vector<SilenceSpan> detected;
  if (silences == nullptr) {
    detected = detect_silences(clip);
    silences = &detected;
  }
  FluencyInputs in;
  in.total_time_s = clip.duration_s();
  in.filled_pauses = filled_pauses;
  std::vector<TimeSpan> quiet;
  double silent = 0.0;
  for (const auto& s : *silences) {
    in.pauses.push_back(s.duration_s());
    quiet.push_back(s.span());
    silent += s.duration_s();
  }
  in.speaking_time_s = std::max(0.0, in.total_time_s - silent);
  const std::vector<TimeSpan> speech = complement(quiet, in.total_time_s);
  in.syllables = count_syllables(clip, speech);
  return make_report(in);
}

std::vector<MetricDelta> compare(const FluencyReport& before, const FluencyReport& after) {
  return {
      {"SR", before.sr, after.sr, true},     {"AR", before.ar, after.ar, true},
      {"PTR", before.ptr, after.ptr, true},  {"MLR", before.mlr, after.mlr, true},
      {"MLP", before.mlp, after.mlp, false}, {"FPM", before.fpm, after.fpm, false},
  };
}

std::string format_report(const FluencyReport& r) {
  std::string s = "# disfluency-report v1\n";
  char buf[128];
  auto line = [&](const char* k, double v) {
    std::snprintf(buf, sizeof buf, "%s %.12g\n", k, v);
    s += buf;
  };
  line("sr", r.sr);
  line("ar", r.ar);
  line("ptr", r.ptr);
  line("mlr", r.mlr);
  line("mlp", r.mlp);
  line("fpm", r.fpm);
  line("syllables", static_cast<double>(r.inputs.syllables));
  line("total_time_s", r.inputs.total_time_s);
  line("speaking_time_s", r.inputs.speaking_time_s);
  line("filled_pauses", static_cast<double>(r.inputs.filled_pauses));
  s += "pauses";
  for (double p : r.inputs.pauses) {
    std::snprintf(buf, sizeof buf, " %.9f", p);
    s += buf;
  }
  s += "\n";
  return s;
}

FluencyReport parse_report(std::string_view text) {
  FluencyReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "pauses") {
      double p;
      while (ls >> p) r.inputs.pauses.push_back(p);
      continue;
    }
    double v;
    if (!(ls >> v)) throw ParseError("report line '" + line + "' has no value");
    ++seen;
    if (key == "sr") r.sr = v;
    else if (key == "ar") r.ar = v;
    else if (key == "ptr") r.ptr = v;
    else if (key == "mlr") r.mlr = v;
    else if (key == "mlp") r.mlp = v;
    else if (key == "fpm") r.fpm = v;
    else if (key == "syllables") r.inputs.syllables = static_cast<std::size_t>(v);
    else if (key == "total_time_s") r.inputs.total_time_s = v;
    else if (key == "speaking_time_s") r.inputs.speaking_time_s = v;
    else if (key == "filled_pauses") r.inputs.filled_pauses = static_cast<std::size_t>(v);
    else --seen;
  }
  if (seen < 6) throw ParseError("report is missing metrics");
  return r;
}

}  // namespace disfluency
