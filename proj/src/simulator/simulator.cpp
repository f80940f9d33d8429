#include "stdcoder/simulator.hpp"

#include <random>

namespace stdcoder::sim {

using nlohmann::json;

void SimScenario::validate() const {
  if (!(morning_coding_mean > 0 && afternoon_coding_mean > 0 && noncoding_mean > 0))
    throw DataError("scenario block means must be positive");
  if (!(commit_prob > 0 && commit_prob < 1)) throw DataError("commit probability must lie in (0, 1)");
  if (weeks < 1) throw DataError("scenario needs at least one week");
  for (const auto& b : schedule)
    if (!(b.start_hour >= 0 && b.start_hour < 24 && b.end_hour > b.start_hour && b.end_hour <= 24))
      throw DataError("schedule hours must lie within [0, 24)");
}

bool SimScenario::in_schedule(std::int64_t minute) const {
  const std::int64_t epoch = start_minute + minute;
  const int day = weekday_of_minute(epoch);
  const double hour = static_cast<double>(((epoch % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay) / 60.0;
  for (const auto& b : schedule)
    if ((b.weekdays >> day) & 1u && hour >= b.start_hour && hour < b.end_hour) return true;
  return false;
}

bool SimScenario::second_regime(std::int64_t minute) const {
  return regime_change && minute >= length_minutes() / 2;
}

double SimScenario::coding_mean_at(std::int64_t minute) const {
  const std::int64_t epoch = start_minute + minute;
  const double hour = static_cast<double>(((epoch % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay) / 60.0;
  bool morning = hour < afternoon_start_hour;
  if (second_regime(minute)) morning = !morning;
  return morning ? morning_coding_mean : afternoon_coding_mean;
}

double SimScenario::stationary_coding_probability(std::int64_t minute) const {
  if (!in_schedule(minute)) return 0.0;
  const double c = coding_mean_at(minute);
  return c / (c + noncoding_mean);
}

json SimScenario::to_json() const {
  json blocks = json::array();
  for (const auto& b : schedule)
    blocks.push_back({{"weekdays", b.weekdays}, {"start_hour", b.start_hour}, {"end_hour", b.end_hour}});
  return {{"schedule", blocks},
          {"morning_coding_mean", morning_coding_mean},
          {"afternoon_coding_mean", afternoon_coding_mean},
          {"noncoding_mean", noncoding_mean},
          {"afternoon_start_hour", afternoon_start_hour},
          {"commit_prob", commit_prob},
          {"weeks", weeks},
          {"regime_change", regime_change},
          {"start_utc_min", start_minute}};
}

SimScenario default_scenario(int weeks) {
  SimScenario s;
  s.weeks = weeks;
  s.validate();
  return s;
}

SimScenario regime_change_scenario(int n_weeks) {
  if (n_weeks < 1) throw DataError("regime change needs n_weeks >= 1");
  SimScenario s = default_scenario(2 * n_weeks);
  s.regime_change = true;
  return s;
}

Simulation simulate_developer(const SimScenario& scenario, std::uint64_t seed) {
  scenario.validate();
  std::mt19937_64 rng(seed);
  const std::int64_t length = scenario.length_minutes();
  Simulation out;
  out.coding.assign(static_cast<std::size_t>(length), 0);
  std::vector<std::int64_t> commits;
  bool coding = false;
  bool was_scheduled = false;
  for (std::int64_t m = 0; m < length; ++m) {
    const bool scheduled = scenario.in_schedule(m);
    if (!scheduled) {
      coding = false;
    } else if (!was_scheduled) {
      const double c = scenario.coding_mean_at(m);
      coding = uniform01(rng) < c / (c + scenario.noncoding_mean);
    } else if (coding) {
      if (uniform01(rng) < 1.0 / scenario.coding_mean_at(m)) coding = false;
    } else {
      if (uniform01(rng) < 1.0 / scenario.noncoding_mean) coding = true;
    }
    was_scheduled = scheduled;
    if (coding) {
      out.coding[static_cast<std::size_t>(m)] = 1;
      if (uniform01(rng) < scenario.commit_prob) commits.push_back(m);
    }
  }
  out.timeline = hmm::make_timeline("sim", scenario.start_minute, length, commits);
  return out;
}

Simulation simulate_from_hmm(const hmm::HmmParams& params, std::int64_t window_start, std::int64_t length,
                             std::uint64_t seed, const std::string& author) {
  hmm::DeveloperTimeline shell;
  shell.window_start = window_start;
  shell.length = length;
  auto series = hmm::transition_series(params, shell);
  std::mt19937_64 rng(seed);
  Simulation out;
  out.coding.assign(static_cast<std::size_t>(length), 0);
  std::vector<std::int64_t> commits;
  bool coding = false;
  for (std::int64_t m = 0; m < length; ++m) {
    const auto i = static_cast<std::size_t>(m);
    const double s = series.start[i];
    const double e = series.end[i];
    if (m == 0)
      coding = uniform01(rng) < s / (s + e);
    else
      coding = coding ? uniform01(rng) >= e : uniform01(rng) < s;
    if (coding) {
      out.coding[i] = 1;
      if (uniform01(rng) < series.commit_prob) commits.push_back(m);
    }
  }
  out.timeline = hmm::make_timeline(author, window_start, length, commits);
  return out;
}

hmm::DeveloperTimeline metronome_timeline(int weeks, int period_minutes, std::int64_t start_minute) {
  SimScenario s = default_scenario(weeks);
  s.start_minute = start_minute;
  std::vector<std::int64_t> commits;
  std::int64_t since = 0;
  for (std::int64_t m = 0; m < s.length_minutes(); ++m) {
    if (!s.in_schedule(m)) {
      since = 0;
      continue;
    }
    if (++since % period_minutes == 0) commits.push_back(m);
  }
  return hmm::make_timeline("metronome", start_minute, s.length_minutes(), commits);
}

}  // namespace stdcoder::sim
