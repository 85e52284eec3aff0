// SPDX-License-Identifier: Apache-2.0
#include "disfluency/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "disfluency/silence.hpp"

namespace disfluency {

ReportSpans spans_from_plan(const AudioClip& before, const RepairPlan& plan) {
  ReportSpans out;
  std::vector<TimeSpan> masks;
  FillMode fill = FillMode::noise_floor;
  for (const auto& e : plan.edits) {
    if (e.kind == EditKind::mask_filler) {
      out.fillers.push_back(e.span);
      masks.push_back(e.span);
      fill = e.fill;
    } else {
      out.disfluent.push_back(e.span);
    }
  }
  const AudioClip masked = mask_fillers(before, masks, fill);
  for (const auto& s : detect_silences(masked)) {
    const bool retimed = std::any_of(out.disfluent.begin(), out.disfluent.end(),
                                     [&](const TimeSpan& r) { return r.overlaps(s.span()); });
    if (!retimed) out.fluent.push_back(s.span());
  }
  return out;
}

namespace {

constexpr int kWidth = 1200;
constexpr int kWaveHeight = 120;
constexpr int kBarHeight = 18;

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Min/max envelope per pixel column as one closed path.
std::string waveform_svg(const AudioClip& clip, double seconds, double gain, const ReportSpans* spans,
                         const std::string& label) {
  const int h = kWaveHeight + (spans ? kBarHeight + 4 : 0);
  std::string s = "<figure><figcaption>" + escape(label) + "</figcaption>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
       std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " + std::to_string(h) + "\">\n";
  s += "<rect width=\"100%\" height=\"" + std::to_string(kWaveHeight) + "\" fill=\"#fafafa\"/>\n";
  const double px_per_s = seconds > 0 ? kWidth / seconds : 0.0;
  const double mid = kWaveHeight / 2.0;
  const int cols = std::max(1, static_cast<int>(clip.duration_s() * px_per_s));
  std::string top, bottom;
  const auto n = clip.size();
  for (int c = 0; c < cols && n > 0; ++c) {
    const std::size_t b = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(cols);
    const std::size_t e = std::max(b + 1, n * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(cols));
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = b; i < std::min(e, n); ++i) {
      lo = std::min(lo, clip.data()[i]);
      hi = std::max(hi, clip.data()[i]);
    }
    top += (c == 0 ? "M" : "L") + std::to_string(c) + "," + fmt("%.1f", mid - gain * hi * mid);
    bottom = "L" + std::to_string(c) + "," + fmt("%.1f", mid - gain * lo * mid) + bottom;
  }
  if (!top.empty()) s += "<path d=\"" + top + bottom + "Z\" fill=\"#4a4a4a\" stroke=\"none\"/>\n";
  if (spans != nullptr) {
    const double y = kWaveHeight + 4;
    auto bar = [&](const std::vector<TimeSpan>& v, const char* cls, const char* color) {
      for (const auto& t : v) {
        s += "<rect class=\"span " + std::string(cls) + "\" x=\"" + fmt("%.2f", t.start_s * px_per_s) + "\" y=\"" +
             fmt("%.0f", y) + "\" width=\"" + fmt("%.2f", std::max(1.0, t.duration_s() * px_per_s)) +
             "\" height=\"" + std::to_string(kBarHeight) + "\" fill=\"" + color + "\"><title>" + cls + " " +
             fmt("%.3f", t.start_s) + "-" + fmt("%.3f", t.end_s) + " s</title></rect>\n";
      }
    };
    bar(spans->fillers, "filler", "#1f6fd1");
    bar(spans->disfluent, "disfluent", "#8b4513");
    bar(spans->fluent, "fluent", "#2e9b4f");
  }
  s += "</svg></figure>\n";
  return s;
}

}  // namespace

std::string render_report(const ReportInput& in) {
  const double seconds = std::max(in.before.duration_s(), in.after.duration_s());
  double peak = 0.0;
  for (double v : in.before.data()) peak = std::max(peak, std::abs(v));
  for (double v : in.after.data()) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.0 ? 0.95 / peak : 1.0;
  ReportSpans spans;
  if (!in.plans.empty()) spans = spans_from_plan(in.before, in.plans.front());
  std::string s = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" + escape(in.title) + "</title>\n";
  s += "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
       "td,th{border:1px solid #ccc;padding:4px 10px;text-align:right}"
       ".key span{display:inline-block;width:1em;height:1em;margin:0 .3em 0 1em;vertical-align:middle}</style>\n";
  s += "</head><body>\n<h1>" + escape(in.title) + "</h1>\n";
  s += "<p class=\"key\"><span style=\"background:#1f6fd1\"></span>filler"
       "<span style=\"background:#8b4513\"></span>disfluent silence"
       "<span style=\"background:#2e9b4f\"></span>fluent silence</p>\n";
  s += waveform_svg(in.before, seconds, gain, &spans, "Before (" + fmt("%.2f", in.before.duration_s()) + " s)");
  s += waveform_svg(in.after, seconds, gain, nullptr, "After (" + fmt("%.2f", in.after.duration_s()) + " s)");

  s += "<table class=\"metrics\">\n<tr><th></th><th>Before</th><th>After</th><th>Change</th></tr>\n";
  const char* names[] = {"Speech rate (SR)", "Articulation rate (AR)", "Phonation time ratio (PTR)",
                         "Mean length of runs (MLR)", "Mean length of pauses (MLP)", "Filled pauses per min (FPM)"};
  const auto deltas = compare(in.before_metrics, in.after_metrics);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const auto& d = deltas[i];
    s += "<tr><th>" + std::string(names[i]) + (d.higher_is_better ? " &uarr;" : " &darr;") + "</th><td>" +
         fmt("%.3f", d.before) + "</td><td>" + fmt("%.3f", d.after) + "</td><td>" + fmt("%+.3f", d.delta()) +
         "</td></tr>\n";
  }
  s += "</table>\n";

  std::size_t n_edits = 0;
  for (const auto& p : in.plans) n_edits += p.edits.size();
  s += "<p>" + std::to_string(spans.fillers.size()) + " fillers masked, " + std::to_string(spans.disfluent.size()) +
       " silences retimed to " + fmt("%.3f", in.plans.empty() ? 0.0 : in.plans.front().target_silence_s) + " s, " +
       std::to_string(spans.fluent.size()) + " fluent silences kept";
  if (in.plans.size() > 1) {
    s += "; " + std::to_string(n_edits - in.plans.front().edits.size()) + " further edits in " +
         std::to_string(in.plans.size() - 1) + " follow-up passes";
  }
  s += ".</p>\n</body></html>\n";
  return s;
}

}  // namespace disfluency
