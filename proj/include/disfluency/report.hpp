// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "disfluency/audio.hpp"
#include "disfluency/metrics.hpp"
#include "disfluency/repair.hpp"
#include "disfluency/time_span.hpp"

namespace disfluency {

/// Segments drawn over the original waveform.
struct ReportSpans {
  std::vector<TimeSpan> fillers;    // mask edits
  std::vector<TimeSpan> disfluent;  // retime edits
  std::vector<TimeSpan> fluent;     // silences left untouched

  std::size_t total() const { return fillers.size() + disfluent.size() + fluent.size(); }
};

/// Fillers and disfluent silences come from the first plan; fluent silences
/// are the silences of the masked original that no retime touches.
ReportSpans spans_from_plan(const AudioClip& before, const RepairPlan& plan);

struct ReportInput {
  std::string title = "Fluency repair report";
  AudioClip before;
  AudioClip after;
  std::vector<RepairPlan> plans;
  FluencyReport before_metrics;
  FluencyReport after_metrics;
};

/// Single self-contained HTML page: inline SVG waveforms with coloured
/// segment bars and a before/after metric table.
std::string render_report(const ReportInput& in);

}  // namespace disfluency
