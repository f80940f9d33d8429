#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "stdcoder/hmm.hpp"

namespace stdcoder::sim {

// 2024-01-01 00:00 UTC, a Monday.
inline constexpr std::int64_t kDefaultStartMinute = 19723LL * 1440LL;

struct WorkBlock {
  std::uint8_t weekdays = 0x1f;  // bit 0 = Monday
  double start_hour = 9.0;
  double end_hour = 17.0;
};

struct SimScenario {
  std::vector<WorkBlock> schedule{WorkBlock{}};
  double morning_coding_mean = 50.0;    // minutes
  double afternoon_coding_mean = 20.0;  // minutes
  double noncoding_mean = 30.0;         // minutes
  double afternoon_start_hour = 13.0;
  double commit_prob = 0.04;  // per coding minute
  int weeks = 4;
  // Second half swaps the morning and afternoon coding means.
  bool regime_change = false;
  std::int64_t start_minute = kDefaultStartMinute;

  void validate() const;
  std::int64_t length_minutes() const { return static_cast<std::int64_t>(weeks) * kMinutesPerWeek; }
  bool in_schedule(std::int64_t minute) const;
  bool second_regime(std::int64_t minute) const;
  // Mean coding-block length in effect at a window-relative minute.
  double coding_mean_at(std::int64_t minute) const;
  // Stationary P(coding) of the generator at a minute (0 outside the schedule).
  double stationary_coding_probability(std::int64_t minute) const;

  nlohmann::json to_json() const;
};

SimScenario default_scenario(int weeks);

// 2 * n_weeks, with the morning/afternoon swap at week n_weeks.
SimScenario regime_change_scenario(int n_weeks);

struct Simulation {
  hmm::DeveloperTimeline timeline;
  std::vector<std::uint8_t> coding;  // ground truth per minute
};

// Blocks alternate inside scheduled hours with geometric per-minute exit
// probabilities 1 / mean; each scheduled stretch starts from the stationary
// state mix and nothing carries over between stretches.
Simulation simulate_developer(const SimScenario& scenario, std::uint64_t seed);

// Draws a developer from the neural HMM itself.
Simulation simulate_from_hmm(const hmm::HmmParams& params, std::int64_t window_start, std::int64_t length,
                             std::uint64_t seed, const std::string& author = "hmm-draw");

// Commits at a fixed period inside the default 9-5 weekday schedule.
hmm::DeveloperTimeline metronome_timeline(int weeks, int period_minutes,
                                          std::int64_t start_minute = kDefaultStartMinute);

}  // namespace stdcoder::sim
