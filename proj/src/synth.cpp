// SPDX-License-Identifier: Apache-2.0
#include "disfluency/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "disfluency/errors.hpp"
#include "disfluency/rng.hpp"
#include "disfluency/silence.hpp"

namespace disfluency {

std::string_view to_string(SpanClass c) {
  switch (c) {
    case SpanClass::word: return "word";
    case SpanClass::filler: return "filler";
    case SpanClass::silence_fluent: return "silence_fluent";
    case SpanClass::silence_disfluent: return "silence_disfluent";
  }
  return "word";
}

SpanClass span_class_from_string(std::string_view s) {
  if (s == "word") return SpanClass::word;
  if (s == "filler") return SpanClass::filler;
  if (s == "silence_fluent") return SpanClass::silence_fluent;
  if (s == "silence_disfluent") return SpanClass::silence_disfluent;
  throw ParseError("unknown span class '" + std::string(s) + "'");
}

std::vector<TimeSpan> LabelTrack::spans_of(SpanClass c) const {
  std::vector<TimeSpan> out;
  for (const auto& s : spans) {
    if (s.cls == c) out.push_back(s.span());
  }
  return out;
}

std::size_t LabelTrack::count(SpanClass c) const {
  return static_cast<std::size_t>(std::count_if(spans.begin(), spans.end(), [c](const LabeledSpan& s) { return s.cls == c; }));
}

int LabelTrack::total_syllables() const {
  int n = 0;
  for (const auto& s : spans) n += s.syllables;
  return n;
}

bool LabelTrack::filler_adjacent(std::size_t i) const {
  return (i > 0 && spans[i - 1].cls == SpanClass::filler) ||
         (i + 1 < spans.size() && spans[i + 1].cls == SpanClass::filler);
}

void LabelTrack::validate(double duration_s) const {
  constexpr double eps = 1e-6;
  double cursor = 0.0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (std::abs(s.start_s - cursor) > eps) throw ParseError("label spans do not tile the clip at span " + std::to_string(i));
    if (!(s.end_s > s.start_s)) throw ParseError("label span " + std::to_string(i) + " is empty");
    if (s.syllables < 0) throw ParseError("negative syllable count");
    cursor = s.end_s;
  }
  if (duration_s >= 0.0 && std::abs(cursor - duration_s) > 1e-3) {
    throw ParseError("label spans end at " + std::to_string(cursor) + " s, clip lasts " + std::to_string(duration_s) + " s");
  }
}

std::string format_labels(const LabelTrack& t) {
  std::string s = "# disfluency-labels v1\n";
  char buf[128];
  for (const auto& sp : t.spans) {
    if (sp.cls == SpanClass::word) {
      std::snprintf(buf, sizeof buf, "%.7f %.7f %s %d\n", sp.start_s, sp.end_s, "word", sp.syllables);
    } else {
      std::snprintf(buf, sizeof buf, "%.7f %.7f %s\n", sp.start_s, sp.end_s, std::string(to_string(sp.cls)).c_str());
    }
    s += buf;
  }
  return s;
}

LabelTrack parse_labels(std::string_view text) {
  LabelTrack t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    LabeledSpan s;
    std::string cls;
    if (!(ls >> s.start_s >> s.end_s >> cls)) throw ParseError("label line " + std::to_string(lineno) + " is malformed");
    s.cls = span_class_from_string(cls);
    int syl = 0;
    if (ls >> syl) s.syllables = syl;
    t.spans.push_back(s);
  }
  t.validate();
  return t;
}

void write_labels(const LabelTrack& t, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  f << format_labels(t);
  if (!f) throw IoError("cannot write labels " + path.string());
}

LabelTrack read_labels(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read labels " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_labels(ss.str());
}

void SynthSpec::validate() const {
  auto ordered = [](const Range& r) { return r.lo > 0.0 && r.hi >= r.lo && std::isfinite(r.hi); };
  if (n_clips < 0) throw SpecError("n_clips must be nonnegative");
  if (!(clip_len_s > 0.0)) throw SpecError("clip_len_s must be positive");
  if (!ordered(disfluent_pause_s) || !ordered(fluent_pause_s) || !ordered(word_len_s)) {
    throw SpecError("ranges must be positive and ordered");
  }
  if (!(disfluent_pause_s.lo > kDisfluentPauseS)) throw SpecError("disfluent pauses must exceed 0.7 s");
  if (fluent_pause_s.hi > kDisfluentPauseS) throw SpecError("fluent pauses must not exceed 0.7 s");
  if (!(filler_rate >= 0.0) || !(disfluent_pause_prob >= 0.0 && disfluent_pause_prob <= 1.0)) {
    throw SpecError("filler rate and pause probability out of range");
  }
  if (!std::isfinite(snr_db)) throw SpecError("snr_db must be finite");
  if (sample_rate < 8000) throw SpecError("sample rate below 8 kHz");
  const double longest = std::max({disfluent_pause_s.hi, fluent_pause_s.hi + word_len_s.hi + fluent_pause_s.hi});
  if (longest >= clip_len_s) throw SpecError("pauses and words do not fit in the clip length");
}

namespace {

constexpr double kSyllableMinS = 0.14;
constexpr double kSyllableMaxS = 0.24;
constexpr double kEnvelopeFloor = 0.08;
constexpr double kLevel = 0.12;
constexpr double kFillerMinS = 0.3;
constexpr double kFillerMaxS = 0.8;
constexpr double kFillerRampS = 0.040;
constexpr double kWordRampS = 0.010;

struct Piece {
  SpanClass cls;
  std::size_t n;
  std::vector<std::size_t> syllables;  // words: per-syllable sample counts
};

// Two-pole resonator with unit peak-normalization left to the caller.
void resonate(std::vector<double>& x, double freq, double bw, double fs) {
  const double r = std::exp(-std::numbers::pi * bw / fs);
  const double a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / fs);
  const double a2 = -r * r;
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = v + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

std::vector<double> pulse_train(std::size_t n, double f0_start, double f0_end, double fs, double& phase) {
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double f0 = f0_start + (f0_end - f0_start) * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(1, n - 1));
    phase += f0 / fs;
    if (phase >= 1.0) {
      phase -= 1.0;
      x[i] = 1.0;
    }
  }
  return x;
}

void unit_rms(std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  const double r = std::sqrt(acc / static_cast<double>(std::max<std::size_t>(1, x.size())));
  if (r > 0.0) {
    for (double& v : x) v /= r;
  }
}

void edge_ramps(std::vector<double>& x, std::size_t ramp) {
  ramp = std::min(ramp, x.size() / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(ramp));
    x[i] *= w;
    x[x.size() - 1 - i] *= w;
  }
}

std::vector<double> render_word(const Piece& p, Rng& rng, double fs) {
  std::vector<double> word;
  word.reserve(p.n);
  double phase = rng.uniform();
  for (std::size_t n : p.syllables) {
    const double f0 = rng.uniform(120.0, 220.0);
    const double f0_end = f0 * rng.uniform(0.9, 1.1);
    const double f1 = rng.uniform(300.0, 900.0);
    const double f2 = rng.uniform(std::max(900.0, f1 + 300.0), 2500.0);
    const double peak = rng.uniform(0.7, 1.0);
    std::vector<double> s = pulse_train(n, f0, f0_end, fs, phase);
    resonate(s, f1, 90.0, fs);
    resonate(s, f2, 150.0, fs);
    unit_rms(s);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std::sin(std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
      s[i] *= peak * (kEnvelopeFloor + (1.0 - kEnvelopeFloor) * u * u);
    }
    word.insert(word.end(), s.begin(), s.end());
  }
  edge_ramps(word, static_cast<std::size_t>(std::lround(kWordRampS * fs)));
  return word;
}

std::vector<double> render_filler(std::size_t n, Rng& rng, double fs) {
  double phase = rng.uniform();
  const double f0 = rng.uniform(110.0, 180.0);
  std::vector<double> s = pulse_train(n, f0, f0, fs, phase);
  resonate(s, rng.uniform(450.0, 550.0), 60.0, fs);
  unit_rms(s);
  const double peak = rng.uniform(0.7, 1.0);
  for (double& v : s) v *= peak;
  edge_ramps(s, static_cast<std::size_t>(std::lround(kFillerRampS * fs)));
  return s;
}

std::size_t poisson(Rng& rng, double lambda) {
  const double limit = std::exp(-lambda);
  double p = rng.uniform();
  std::size_t k = 0;
  while (p > limit) {
    ++k;
    p *= rng.uniform();
  }
  return k;
}

SynthClip render_pieces(const std::vector<Piece>& pieces, const SynthSpec& spec, Rng& rng,
                        std::uint64_t clip_seed) {
  const double fs = spec.sample_rate;
  std::size_t N = 0;
  for (const auto& p : pieces) N += p.n;
  std::vector<double> x(N, 0.0);
  SynthClip out;
  std::size_t at = 0;
  double speech_energy = 0.0;
  std::size_t speech_n = 0;
  for (const auto& p : pieces) {
    LabeledSpan s{static_cast<double>(at) / fs, static_cast<double>(at + p.n) / fs, p.cls, 0};
    std::vector<double> wave;
    if (p.cls == SpanClass::word) {
      wave = render_word(p, rng, fs);
      s.syllables = static_cast<int>(p.syllables.size());
    } else if (p.cls == SpanClass::filler) {
      wave = render_filler(p.n, rng, fs);
    }
    for (std::size_t i = 0; i < wave.size(); ++i) {
      x[at + i] = kLevel * wave[i];
      speech_energy += x[at + i] * x[at + i];
    }
    speech_n += wave.size();
    out.labels.spans.push_back(s);
    at += p.n;
  }
  const double speech_rms = speech_n ? std::sqrt(speech_energy / static_cast<double>(speech_n)) : kLevel;
  const double noise_rms = speech_rms * std::pow(10.0, -spec.snr_db / 20.0);
  Rng noise(mix_seed(mix_seed(spec.seed, clip_seed), 0x6E6F697365ULL));
  for (double& v : x) v += noise_rms * noise.normal();
  out.audio = AudioClip(std::move(x), spec.sample_rate);
  return out;
}

}  // namespace

SynthClip generate_clip(const SynthSpec& spec, std::uint64_t clip_seed) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, clip_seed));
  const double fs = spec.sample_rate;
  const auto N = static_cast<std::size_t>(std::llround(spec.clip_len_s * fs));
  auto samples = [&](double s) { return static_cast<std::size_t>(std::llround(s * fs)); };
  auto draw = [&](const Range& r) { return samples(rng.uniform(r.lo, r.hi)); };

  std::vector<double> targets;
  const double lo_t = 0.5, hi_t = spec.clip_len_s - 1.5;
  if (hi_t > lo_t) {
    const std::size_t k = poisson(rng, spec.filler_rate * spec.clip_len_s / 60.0);
    for (std::size_t i = 0; i < k; ++i) targets.push_back(rng.uniform(lo_t, hi_t));
    std::sort(targets.begin(), targets.end());
  }

  std::vector<Piece> pieces;
  std::size_t pos = 0;
  auto emit = [&](Piece p) {
    pos += p.n;
    pieces.push_back(std::move(p));
  };
  emit({SpanClass::silence_fluent, draw(spec.fluent_pause_s), {}});
  std::size_t next_filler = 0;
  bool word_since_group = false;
  while (pos < N) {
    if (word_since_group && next_filler < targets.size() && static_cast<double>(pos) / fs >= targets[next_filler]) {
      const std::size_t p1 = draw(spec.fluent_pause_s);
      const std::size_t f = samples(rng.uniform(kFillerMinS, kFillerMaxS));
      const std::size_t p2 = draw(spec.fluent_pause_s);
      ++next_filler;
      if (pos + p1 + f + p2 > N) break;
      // A filler replaces the pause that followed the previous word.
      if (!pieces.empty() && is_silence(pieces.back().cls)) {
        pos -= pieces.back().n;
        pieces.pop_back();
      }
      emit({SpanClass::silence_disfluent, p1, {}});
      emit({SpanClass::filler, f, {}});
      emit({SpanClass::silence_disfluent, p2, {}});
      word_since_group = false;
      continue;
    }
    Piece w{SpanClass::word, 0, {}};
    const auto n_syl = std::max<long>(1, std::lround(rng.uniform(spec.word_len_s.lo, spec.word_len_s.hi) / 0.19));
    for (long i = 0; i < n_syl; ++i) {
      w.syllables.push_back(samples(rng.uniform(kSyllableMinS, kSyllableMaxS)));
      w.n += w.syllables.back();
    }
    if (pos + w.n > N) break;
    emit(std::move(w));
    word_since_group = true;
    const bool long_pause = rng.uniform() < spec.disfluent_pause_prob;
    const std::size_t gap = long_pause ? draw(spec.disfluent_pause_s) : draw(spec.fluent_pause_s);
    if (pos + gap > N) break;
    emit({long_pause ? SpanClass::silence_disfluent : SpanClass::silence_fluent, gap, {}});
  }
  if (pos < N) {
    const std::size_t rest = N - pos;
    if (!pieces.empty() && is_silence(pieces.back().cls)) {
      pieces.back().n += rest;
    } else {
      pieces.push_back({SpanClass::silence_fluent, rest, {}});
    }
    pos = N;
  }
  // Trailing silence takes the duration rule unless it flanks a filler.
  {
    Piece& last = pieces.back();
    const bool after_filler = pieces.size() >= 2 && pieces[pieces.size() - 2].cls == SpanClass::filler;
    if (is_silence(last.cls) && !after_filler) {
      last.cls = static_cast<double>(last.n) / fs > kDisfluentPauseS ? SpanClass::silence_disfluent
                                                                      : SpanClass::silence_fluent;
    }
  }

  return render_pieces(pieces, spec, rng, clip_seed);
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  f << "# disfluency-manifest v1\n# id wav labels clip_seed words fillers fluent_silences disfluent_silences\n";
  const auto base = path.parent_path();
  for (const auto& e : m.entries) {
    const auto rel = [&](const std::filesystem::path& p) {
      if (p.empty()) return std::string("-");
      return p.is_absolute() ? std::filesystem::relative(p, base.empty() ? "." : base).generic_string() : p.generic_string();
    };
    f << e.id << ' ' << rel(e.wav) << ' ' << rel(e.labels) << ' ' << e.clip_seed << ' ' << e.words << ' ' << e.fillers
      << ' ' << e.fluent << ' ' << e.disfluent << '\n';
  }
  if (!f) throw IoError("cannot write manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read manifest " + path.string());
  const auto base = path.parent_path();
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string wav, labels;
    if (!(ls >> e.id >> wav)) throw ParseError("manifest line " + std::to_string(lineno) + " is malformed");
    if (!(ls >> labels)) labels = "-";
    ls >> e.clip_seed >> e.words >> e.fillers >> e.fluent >> e.disfluent;
    e.wav = std::filesystem::path(wav).is_absolute() ? std::filesystem::path(wav) : base / wav;
    if (labels != "-") e.labels = std::filesystem::path(labels).is_absolute() ? std::filesystem::path(labels) : base / labels;
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create directory " + out_dir.string());
  Manifest m;
  for (int i = 0; i < spec.n_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "clip_%04d", i);
    const SynthClip c = generate_clip(spec, static_cast<std::uint64_t>(i));
    ManifestEntry e;
    e.id = id;
    e.wav = out_dir / (e.id + ".wav");
    e.labels = out_dir / (e.id + ".lab");
    e.clip_seed = static_cast<std::uint64_t>(i);
    e.words = c.labels.count(SpanClass::word);
    e.fillers = c.labels.count(SpanClass::filler);
    e.fluent = c.labels.count(SpanClass::silence_fluent);
    e.disfluent = c.labels.count(SpanClass::silence_disfluent);
    write_wav(c.audio, e.wav);
    write_labels(c.labels, e.labels);
    m.entries.push_back(std::move(e));
  }
  write_manifest(m, out_dir / kManifestName);
  return m;
}

FrameLabels project_labels(const LabelTrack& labels, std::size_t frames, double hop_s, double origin_s) {
  FrameLabels out;
  out.classes.assign(frames, kNonFiller);
  std::size_t k = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double c = origin_s + static_cast<double>(t) * hop_s;
    while (k < labels.spans.size() && labels.spans[k].end_s <= c) ++k;
    if (k == labels.spans.size()) break;
    if (labels.spans[k].start_s <= c && labels.spans[k].cls == SpanClass::filler) out.classes[t] = kFiller;
  }
  return out;
}

SynthClip render_labels(const SynthSpec& spec, const LabelTrack& layout, std::uint64_t clip_seed) {
  spec.validate();
  layout.validate();
  const double fs = spec.sample_rate;
  std::vector<Piece> pieces;
  std::size_t at = 0;
  for (const auto& s : layout.spans) {
    const auto end = static_cast<std::size_t>(std::llround(s.end_s * fs));
    Piece p{s.cls, end - at, {}};
    if (s.cls == SpanClass::word) {
      const auto k = static_cast<std::size_t>(std::max(1, s.syllables));
      for (std::size_t i = 0; i < k; ++i) p.syllables.push_back(p.n * (i + 1) / k - p.n * i / k);
    }
    pieces.push_back(std::move(p));
    at = end;
  }
  Rng rng(mix_seed(mix_seed(spec.seed, clip_seed), 0x4C41594F5554ULL));
  return render_pieces(pieces, spec, rng, clip_seed);
}

}  // namespace disfluency
