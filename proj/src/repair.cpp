// SPDX-License-Identifier: Apache-2.0
#include "disfluency/repair.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "disfluency/errors.hpp"

namespace disfluency {

std::string_view to_string(FillMode m) { return m == FillMode::silence ? "silence" : "noise_floor"; }

FillMode fill_mode_from_string(std::string_view s) {
  if (s == "silence") return FillMode::silence;
  if (s == "noise_floor" || s == "noise") return FillMode::noise_floor;
  throw SpecError("unknown fill mode '" + std::string(s) + "'");
}

std::string_view to_string(EditKind k) { return k == EditKind::mask_filler ? "mask_filler" : "retime_silence"; }

std::size_t RepairPlan::count(EditKind k) const {
  return static_cast<std::size_t>(std::count_if(edits.begin(), edits.end(), [k](const Edit& e) { return e.kind == k; }));
}

namespace {

constexpr double kTimeSlack = 1e-6;

bool contains(const TimeSpan& outer, const TimeSpan& inner) {
  return inner.start_s >= outer.start_s - kTimeSlack && inner.end_s <= outer.end_s + kTimeSlack;
}

std::vector<TimeSpan> spans_of(const std::vector<Edit>& edits, EditKind k) {
  std::vector<TimeSpan> out;
  for (const auto& e : edits) {
    if (e.kind == k) out.push_back(e.span);
  }
  std::sort(out.begin(), out.end(), [](const TimeSpan& a, const TimeSpan& b) { return a.start_s < b.start_s; });
  return out;
}

void require_disjoint(const std::vector<TimeSpan>& sorted, const char* what) {
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start_s < sorted[i - 1].end_s - kTimeSlack) {
      throw PlanError(std::string(what) + " overlap");
    }
  }
}

std::size_t crossfade_samples(int sample_rate) {
  return static_cast<std::size_t>(std::lround(kCrossfadeS * sample_rate));
}

// Ramp weight of the replacement signal at sample i for a span [a, b).
double mask_weight(std::ptrdiff_t i, std::ptrdiff_t a, std::ptrdiff_t b, std::ptrdiff_t xf) {
  const std::ptrdiff_t h = xf / 2;
  if (xf == 0) return (i >= a && i < b) ? 1.0 : 0.0;
  const double up = (static_cast<double>(i - (a - h)) + 0.5) / static_cast<double>(xf);
  const double down = (static_cast<double>((b + h) - i) - 0.5) / static_cast<double>(xf);
  return std::clamp(std::min(up, down), 0.0, 1.0);
}

// Masks one span of `x` in place; marks every altered sample.
void mask_in_place(std::vector<double>& x, std::vector<char>& modified, const TimeSpan& span, FillMode fill,
                   const NoiseFloor& floor, int sample_rate) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto xf = static_cast<std::ptrdiff_t>(crossfade_samples(sample_rate));
  const std::ptrdiff_t h = xf / 2;
  const auto a = static_cast<std::ptrdiff_t>(std::lround(span.start_s * sample_rate));
  const auto b = static_cast<std::ptrdiff_t>(std::lround(span.end_s * sample_rate));
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, a - h);
  const std::ptrdiff_t hi = std::min(n, b + h);
  if (hi <= lo) return;
  std::vector<double> repl;
  if (fill == FillMode::noise_floor) repl = floor.render(static_cast<std::size_t>(hi - lo));
  for (std::ptrdiff_t i = lo; i < hi; ++i) {
    const double w = mask_weight(i, a, b, xf);
    if (w <= 0.0) continue;
    const double r = repl.empty() ? 0.0 : repl[static_cast<std::size_t>(i - lo)];
    auto& s = x[static_cast<std::size_t>(i)];
    s = w >= 1.0 ? r : (1.0 - w) * s + w * r;
    modified[static_cast<std::size_t>(i)] = 1;
  }
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

std::vector<double> NoiseFloor::render(std::size_t n) const {
  std::vector<double> out;
  if (fallback || segment.empty()) return std::vector<double>(n, 0.0);
  std::size_t xf = std::min(crossfade_samples(sample_rate), segment.size() / 2);
  out.reserve(n + segment.size());
  out.insert(out.end(), segment.begin(), segment.end());
  while (out.size() < n) {
    const std::size_t start = out.size() - xf;
    for (std::size_t j = 0; j < xf; ++j) {
      const double a = (static_cast<double>(j) + 0.5) / static_cast<double>(xf);
      out[start + j] = (1.0 - a) * out[start + j] + a * segment[j];
    }
    out.insert(out.end(), segment.begin() + static_cast<std::ptrdiff_t>(xf), segment.end());
  }
  out.resize(n);
  return out;
}

NoiseFloor estimate_noise_floor(const AudioClip& clip, const std::vector<SilenceSpan>* silences) {
  std::vector<SilenceSpan> detected;
  if (silences == nullptr) {
    detected = detect_silences(clip);
    silences = &detected;
  }
  NoiseFloor nf;
  nf.sample_rate = clip.sample_rate();
  const auto trim = static_cast<std::size_t>(std::lround(0.010 * clip.sample_rate()));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : *silences) {
    if (s.duration_s() < 0.1 - 1e-9) continue;
    const std::size_t b = clip.index_at(s.start_s) + trim;
    const std::size_t e = clip.index_at(s.end_s) - trim;
    if (e <= b) continue;
    const auto seg = clip.samples().subspan(b, e - b);
    const double r = rms(seg);
    if (r < best) {
      best = r;
      nf.segment.assign(seg.begin(), seg.end());
    }
  }
  nf.fallback = nf.segment.empty();
  return nf;
}

AudioClip mask_fillers(const AudioClip& clip, std::span<const TimeSpan> spans, FillMode fill,
                       const NoiseFloor* floor) {
  std::vector<TimeSpan> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end(), [](const TimeSpan& a, const TimeSpan& b) { return a.start_s < b.start_s; });
  require_disjoint(sorted, "filler spans");
  if (sorted.empty()) return clip;
  NoiseFloor own;
  if (fill == FillMode::noise_floor && floor == nullptr) {
    own = estimate_noise_floor(clip);
    floor = &own;
  }
  const NoiseFloor zero{{}, clip.sample_rate(), true};
  std::vector<double> x = clip.data();
  std::vector<char> modified(x.size(), 0);
  for (const auto& s : sorted) {
    if (s.start_s < -kTimeSlack || s.end_s > clip.duration_s() + kTimeSlack || s.end_s <= s.start_s) {
      throw PlanError("filler span outside the clip");
    }
    mask_in_place(x, modified, s, fill, floor ? *floor : zero, clip.sample_rate());
  }
  return AudioClip(std::move(x), clip.sample_rate());
}

std::vector<TimeSpan> expand_filler_masks(std::span<const TimeSpan> fillers, std::span<const SilenceSpan> silences,
                                          double clip_duration_s, const MaskPadding& pad) {
  std::vector<TimeSpan> out;
  for (const auto& f : fillers) {
    TimeSpan m = f;
    m.start_s = f.start_s - pad.bare_s;
    m.end_s = f.end_s + pad.bare_s;
    for (const auto& s : silences) {
      if (s.start_s < f.start_s && s.end_s >= f.start_s - pad.search_s && s.end_s <= f.start_s + pad.search_s) {
        m.start_s = std::min(m.start_s, std::max(s.start_s, std::min(f.start_s, s.end_s) - pad.into_silence_s));
      }
      if (s.end_s > f.end_s && s.start_s <= f.end_s + pad.search_s && s.start_s >= f.end_s - pad.search_s) {
        m.end_s = std::max(m.end_s, std::min(s.end_s, std::max(f.end_s, s.start_s) + pad.into_silence_s));
      }
    }
    m.start_s = std::max(0.0, m.start_s);
    m.end_s = std::min(clip_duration_s, m.end_s);
    if (m.end_s > m.start_s) out.push_back(m);
  }
  std::sort(out.begin(), out.end(), [](const TimeSpan& a, const TimeSpan& b) { return a.start_s < b.start_s; });
  std::vector<TimeSpan> merged;
  for (const auto& m : out) {
    if (!merged.empty() && m.start_s <= merged.back().end_s) merged.back().end_s = std::max(merged.back().end_s, m.end_s);
    else merged.push_back(m);
  }
  return merged;
}

std::size_t SilenceHistogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

SilenceHistogram fluent_histogram(std::span<const double> durations, double bin_width_s) {
  if (durations.empty()) throw EmptyHistogram("no fluent silences to histogram");
  if (!(bin_width_s > 0.0)) throw SpecError("histogram bin width must be positive");
  SilenceHistogram h;
  h.bin_width_s = bin_width_s;
  for (double d : durations) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw SpecError("silence durations must be finite and nonnegative");
    const auto k = static_cast<std::size_t>(std::floor(d / bin_width_s + 1e-9));
    if (h.counts.size() <= k) h.counts.resize(k + 1, 0);
    ++h.counts[k];
  }
  std::vector<double> sorted(durations.begin(), durations.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  h.median_duration_s = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return h;
}

double target_silence(const SilenceHistogram& hist) {
  const double k = std::floor(hist.median_duration_s / hist.bin_width_s + 1e-9);
  return (k + 0.5) * hist.bin_width_s;
}

void RepairPlan::validate() const {
  if (!(target_silence_s > 0.0)) throw PlanError("target silence must be positive");
  if (!(source_duration_s > 0.0)) throw PlanError("source duration must be positive");
  for (const auto& e : edits) {
    if (e.span.start_s < -kTimeSlack || e.span.end_s > source_duration_s + kTimeSlack || !(e.span.end_s > e.span.start_s)) {
      throw PlanError("edit outside the source clip");
    }
    if (e.kind == EditKind::retime_silence && !(e.new_duration_s > 0.0)) throw PlanError("retime duration must be positive");
  }
  const auto masks = spans_of(edits, EditKind::mask_filler);
  const auto retimes = spans_of(edits, EditKind::retime_silence);
  require_disjoint(masks, "mask edits");
  require_disjoint(retimes, "retime edits");
  for (const auto& m : masks) {
    for (const auto& r : retimes) {
      if (m.overlaps(r) && !contains(r, m)) throw PlanError("mask partially overlaps a retime");
    }
  }
}

RepairPlan build_plan(double clip_duration_s, std::span<const TimeSpan> filler_masks,
                      std::span<const ClassifiedSilence> silences, double target_s, FillMode fill) {
  RepairPlan plan;
  plan.target_silence_s = target_s;
  plan.source_duration_s = clip_duration_s;
  std::vector<TimeSpan> masks(filler_masks.begin(), filler_masks.end());
  std::sort(masks.begin(), masks.end(), [](const TimeSpan& a, const TimeSpan& b) { return a.start_s < b.start_s; });
  require_disjoint(masks, "filler spans");

  std::vector<TimeSpan> retimes;
  for (const auto& s : silences) {
    if (s.label == SilenceLabel::disfluent) retimes.push_back(s.span.span());
  }
  std::sort(retimes.begin(), retimes.end(), [](const TimeSpan& a, const TimeSpan& b) { return a.start_s < b.start_s; });
  require_disjoint(retimes, "disfluent silences");

  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& r : retimes) {
      for (const auto& m : masks) {
        if (m.overlaps(r) && !contains(r, m)) {
          r.start_s = std::min(r.start_s, m.start_s);
          r.end_s = std::max(r.end_s, m.end_s);
          changed = true;
        }
      }
    }
    std::vector<TimeSpan> joined;
    for (const auto& r : retimes) {
      if (!joined.empty() && r.start_s < joined.back().end_s) {
        joined.back().end_s = std::max(joined.back().end_s, r.end_s);
        changed = true;
      } else {
        joined.push_back(r);
      }
    }
    retimes = std::move(joined);
  }

  for (const auto& m : masks) plan.edits.push_back({EditKind::mask_filler, m, 0.0, fill});
  for (const auto& r : retimes) plan.edits.push_back({EditKind::retime_silence, r, target_s, FillMode::noise_floor});
  std::stable_sort(plan.edits.begin(), plan.edits.end(), [](const Edit& a, const Edit& b) {
    if (a.span.start_s != b.span.start_s) return a.span.start_s < b.span.start_s;
    return static_cast<int>(a.kind) > static_cast<int>(b.kind);
  });
  plan.validate();
  return plan;
}

namespace {

class Splicer {
 public:
  Splicer(const std::vector<double>& src, const std::vector<char>& modified, std::size_t reserve)
      : src_(src), modified_(modified) {
    out_.reserve(reserve);
    trace_.reserve(reserve);
  }

  void copy(std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out_.push_back(src_[i]);
      trace_.push_back(modified_[i] ? -1 : static_cast<std::int64_t>(i));
    }
  }

  // Crossfades `xf` samples from src[from...] into `into[...]`.
  void blend(std::size_t from, std::span<const double> into) {
    const std::size_t xf = into.size();
    for (std::size_t j = 0; j < xf; ++j) {
      const double a = (static_cast<double>(j) + 0.5) / static_cast<double>(xf);
      out_.push_back((1.0 - a) * src_[from + j] + a * into[j]);
      trace_.push_back(-1);
    }
  }

  void synth(std::span<const double> x) {
    out_.insert(out_.end(), x.begin(), x.end());
    trace_.insert(trace_.end(), x.size(), -1);
  }

  std::vector<double>& samples() { return out_; }
  std::vector<std::int64_t>& trace() { return trace_; }

 private:
  const std::vector<double>& src_;
  const std::vector<char>& modified_;
  std::vector<double> out_;
  std::vector<std::int64_t> trace_;
};

}  // namespace

AudioClip apply_plan(const AudioClip& clip, const RepairPlan& plan, const NoiseFloor* floor, ApplyTrace* trace) {
  plan.validate();
  if (std::abs(plan.source_duration_s - clip.duration_s()) > 1e-3) {
    throw PlanError("plan was built for a clip of a different duration");
  }
  const int sr = clip.sample_rate();
  NoiseFloor own;
  if (floor == nullptr) {
    own = estimate_noise_floor(clip);
    floor = &own;
  }
  const NoiseFloor zero{{}, sr, true};

  std::vector<double> x = clip.data();
  std::vector<char> modified(x.size(), 0);
  std::vector<Edit> retimes;
  for (const auto& e : plan.edits) {
    if (e.kind == EditKind::mask_filler) {
      mask_in_place(x, modified, e.span, e.fill, e.fill == FillMode::noise_floor ? *floor : zero, sr);
    } else {
      retimes.push_back(e);
    }
  }
  std::sort(retimes.begin(), retimes.end(), [](const Edit& a, const Edit& b) { return a.span.start_s < b.span.start_s; });

  const std::size_t xf = crossfade_samples(sr);
  Splicer out(x, modified, x.size());
  std::size_t cursor = 0;
  for (const auto& r : retimes) {
    const std::size_t a = clip.index_at(r.span.start_s);
    const std::size_t b = clip.index_at(r.span.end_s);
    const auto n_new = static_cast<std::size_t>(std::llround(r.new_duration_s * sr));
    out.copy(cursor, a);
    cursor = b;
    const std::size_t len = b - a;
    if (n_new == len) {
      out.copy(a, b);
    } else if (n_new < len) {
      const std::size_t f = std::min(xf, n_new);
      const std::size_t head = (n_new + f) / 2;
      const std::size_t tail = n_new + f - head;
      out.copy(a, a + head - f);
      std::vector<double> tail_start(x.begin() + static_cast<std::ptrdiff_t>(b - tail),
                                     x.begin() + static_cast<std::ptrdiff_t>(b - tail + f));
      out.blend(a + head - f, tail_start);
      out.copy(b - tail + f, b);
    } else {
      const std::size_t f = std::min(xf, len / 2);
      const std::size_t head = len / 2;
      const std::size_t tail = len - head;
      const std::size_t m = n_new - len + 2 * f;
      const std::vector<double> ins = r.fill == FillMode::noise_floor ? floor->render(m) : zero.render(m);
      out.copy(a, a + head - f);
      out.blend(a + head - f, std::span<const double>(ins).first(f));
      out.synth(std::span<const double>(ins).subspan(f, m - 2 * f));
      std::vector<double> tail_start(x.begin() + static_cast<std::ptrdiff_t>(a + head),
                                     x.begin() + static_cast<std::ptrdiff_t>(a + head + f));
      // Fade the insert out into the tail.
      const std::size_t base = m - f;
      for (std::size_t j = 0; j < f; ++j) {
        const double w = (static_cast<double>(j) + 0.5) / static_cast<double>(f);
        out.samples().push_back((1.0 - w) * ins[base + j] + w * tail_start[j]);
        out.trace().push_back(-1);
      }
      out.copy(a + head + f, a + head + tail);
    }
  }
  out.copy(cursor, x.size());
  if (trace != nullptr) trace->source = std::move(out.trace());
  return AudioClip(std::move(out.samples()), sr);
}

std::string format_plan(const RepairPlan& plan) {
  std::string s = "# disfluency-plan v1\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "# target_silence_s %.9f\n# source_duration_s %.9f\n", plan.target_silence_s,
                plan.source_duration_s);
  s += buf;
  for (const auto& e : plan.edits) {
    std::snprintf(buf, sizeof buf, "%s %.9f %.9f %.9f %s\n", std::string(to_string(e.kind)).c_str(), e.span.start_s,
                  e.span.end_s, e.new_duration_s, std::string(to_string(e.fill)).c_str());
    s += buf;
  }
  return s;
}

RepairPlan parse_plan(std::string_view text) {
  RepairPlan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  bool saw_target = false, saw_source = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "target_silence_s") saw_target = static_cast<bool>(ls >> plan.target_silence_s);
      else if (key == "source_duration_s") saw_source = static_cast<bool>(ls >> plan.source_duration_s);
      continue;
    }
    std::string kind, fill;
    Edit e;
    if (!(ls >> kind >> e.span.start_s >> e.span.end_s >> e.new_duration_s >> fill)) {
      throw ParseError("plan line " + std::to_string(lineno) + " is malformed");
    }
    if (kind == "mask_filler") e.kind = EditKind::mask_filler;
    else if (kind == "retime_silence") e.kind = EditKind::retime_silence;
    else throw ParseError("plan line " + std::to_string(lineno) + ": unknown edit kind '" + kind + "'");
    try {
      e.fill = fill_mode_from_string(fill);
    } catch (const SpecError&) {
      throw ParseError("plan line " + std::to_string(lineno) + ": unknown fill '" + fill + "'");
    }
    plan.edits.push_back(e);
  }
  if (!saw_target || !saw_source) throw ParseError("plan is missing its header");
  plan.validate();
  return plan;
}

void write_plan(const RepairPlan& plan, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  f << format_plan(plan);
  if (!f) throw IoError("cannot write plan " + path.string());
}

RepairPlan read_plan(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read plan " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_plan(ss.str());
}

std::string format_plans(std::span<const RepairPlan> plans) {
  std::string s;
  for (const auto& p : plans) s += format_plan(p);
  return s;
}

std::vector<RepairPlan> parse_plans(std::string_view text) {
  constexpr std::string_view header = "# disfluency-plan v1";
  std::vector<RepairPlan> out;
  std::size_t pos = text.find(header);
  if (pos == std::string_view::npos) {
    out.push_back(parse_plan(text));
    return out;
  }
  while (pos != std::string_view::npos) {
    const std::size_t next = text.find(header, pos + header.size());
    out.push_back(parse_plan(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    pos = next;
  }
  return out;
}

void write_plans(std::span<const RepairPlan> plans, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  f << format_plans(plans);
  if (!f) throw IoError("cannot write plan " + path.string());
}

std::vector<RepairPlan> read_plans(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read plan " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_plans(ss.str());
}

}  // namespace disfluency
