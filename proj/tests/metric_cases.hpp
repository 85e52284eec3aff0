// SPDX-License-Identifier: Apache-2.0
// Hand-evaluated metric examples, shared by the unit and acceptance tests.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "disfluency/metrics.hpp"

namespace metric_cases {

struct Case {
  std::string name;
  std::function<double()> compute;
  double expected;
};

inline std::vector<Case> all() {
  using namespace disfluency;
  using V = std::vector<double>;
  return {
      {"sr_long_pauses_only", [] { return speech_rate(120, 60.0, V{5.0, 4.0}); }, 120.0},
      {"sr_short_pauses_12s", [] { return speech_rate(120, 60.0, V{2.0, 2.5, 1.5, 2.0, 2.0, 2.0}); }, 150.0},
      {"sr_pause_at_3s_is_long", [] { return speech_rate(60, 40.0, V{3.0, 1.0}); }, 60.0 / 39.0 * 60.0},
      {"ar_120_in_60", [] { return articulation_rate(120, 60.0); }, 120.0},
      {"ar_zero", [] { return articulation_rate(0, 60.0); }, 0.0},
      {"ptr_45_of_60", [] { return phonation_time_ratio(45.0, 60.0); }, 0.75},
      {"ptr_no_silence", [] { return phonation_time_ratio(12.5, 12.5); }, 1.0},
      {"mlr_three_pauses", [] { return mean_length_runs(120, V{0.3, 0.5, 1.0, 0.25, 0.1}); }, 30.0},
      {"mlr_one_run", [] { return mean_length_runs(37, V{0.2, 0.25}); }, 37.0},
      {"mlp_mixed", [] { return mean_length_pauses(V{0.3, 0.5, 0.15}); }, 0.4},
      {"mlp_none_qualify", [] { return mean_length_pauses(V{0.2, 0.1}); }, 0.0},
      {"fpm_3_in_60", [] { return filled_pauses_per_min(3, 60.0); }, 3.0},
      {"fpm_zero", [] { return filled_pauses_per_min(0, 60.0); }, 0.0},
      {"fpm_2_in_10", [] { return filled_pauses_per_min(2, 10.0); }, 12.0},
  };
}

}  // namespace metric_cases
