#include <doctest.h>

#include <cmath>

#include "stdcoder/simulator.hpp"

using namespace stdcoder;
using namespace stdcoder::sim;

namespace {

int weekday(std::int64_t epoch_minute) {
  std::int64_t day = epoch_minute / 1440;
  return static_cast<int>((day + 3) % 7);  // epoch day 0 was a Thursday
}

double hour_of(std::int64_t epoch_minute) { return static_cast<double>(epoch_minute % 1440) / 60.0; }

// Geometric run lengths via exits per exposed minute, which stays unbiased
// when runs are cut off by the end of a stretch.
struct Hazard {
  double exposure = 0, exits = 0;
  double mean() const { return exposure / exits; }
};

}  // namespace

TEST_CASE("nothing happens outside the schedule") {
  auto s = simulate_developer(default_scenario(3), 1);
  const auto& tl = s.timeline;
  REQUIRE(tl.length == 3 * 10080);
  REQUIRE(s.coding.size() == static_cast<std::size_t>(tl.length));
  for (std::int64_t t = 0; t < tl.length; ++t) {
    std::int64_t m = tl.window_start + t;
    bool on = weekday(m) < 5 && hour_of(m) >= 9 && hour_of(m) < 17;
    if (!on) REQUIRE(s.coding[t] == 0);
    if (tl.commit_at[t]) REQUIRE(s.coding[t] == 1);
  }
}

TEST_CASE("commit count tracks coding minutes") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = simulate_developer(default_scenario(8), seed);
    double coding = 0;
    for (auto c : s.coding) coding += c;
    double expected = 0.04 * coding;
    double sd = std::sqrt(coding * 0.04 * 0.96);
    CHECK(std::abs(static_cast<double>(s.timeline.commit_count()) - expected) < 3 * sd);
  }
}

TEST_CASE("simulations are reproducible") {
  auto a = simulate_developer(default_scenario(2), 9);
  auto b = simulate_developer(default_scenario(2), 9);
  auto c = simulate_developer(default_scenario(2), 10);
  CHECK(a.coding == b.coding);
  CHECK(a.timeline.commit_minutes == b.timeline.commit_minutes);
  CHECK(a.coding != c.coding);
}

TEST_CASE("block means recovered over a long run") {
  auto sc = default_scenario(50);
  auto s = simulate_developer(sc, 3);
  Hazard morning, afternoon, idle;
  for (std::int64_t t = 1; t < s.timeline.length; ++t) {
    if (!sc.in_schedule(t) || !sc.in_schedule(t - 1)) continue;
    double h = hour_of(s.timeline.window_start + t);
    Hazard& coding = h < 13 ? morning : afternoon;
    if (s.coding[t - 1]) {
      coding.exposure += 1;
      coding.exits += s.coding[t] == 0;
    } else {
      idle.exposure += 1;
      idle.exits += s.coding[t] == 1;
    }
  }
  CHECK(morning.mean() == doctest::Approx(50.0).epsilon(0.10));
  CHECK(afternoon.mean() == doctest::Approx(20.0).epsilon(0.10));
  CHECK(idle.mean() == doctest::Approx(30.0).epsilon(0.10));
}

TEST_CASE("regime change mirrors the coding means") {
  auto sc = regime_change_scenario(3);
  CHECK(sc.weeks == 6);
  std::int64_t morning = 10 * 60, afternoon = 14 * 60;
  std::int64_t late = 3 * 10080;
  CHECK(!sc.second_regime(morning));
  CHECK(sc.second_regime(late + morning));
  CHECK(sc.coding_mean_at(morning) == 50.0);
  CHECK(sc.coding_mean_at(afternoon) == 20.0);
  CHECK(sc.coding_mean_at(late + morning) == 20.0);
  CHECK(sc.coding_mean_at(late + afternoon) == 50.0);
  CHECK(sc.stationary_coding_probability(morning) == doctest::Approx(50.0 / 80.0));
  CHECK(sc.stationary_coding_probability(5 * 1440 + morning) == 0.0);  // Saturday
}

TEST_CASE("scenario validation") {
  auto sc = default_scenario(1);
  sc.commit_prob = 1.5;
  CHECK_THROWS_AS(sc.validate(), DataError);
  sc = default_scenario(1);
  sc.noncoding_mean = 0;
  CHECK_THROWS_AS(simulate_developer(sc, 0), DataError);
  CHECK_THROWS_AS(regime_change_scenario(0), DataError);
}

TEST_CASE("draws from the neural model") {
  auto p = hmm::HmmParams::initial(8, 1e-4, 2);
  auto a = simulate_from_hmm(p, kDefaultStartMinute, 5000, 4);
  auto b = simulate_from_hmm(p, kDefaultStartMinute, 5000, 4);
  CHECK(a.coding == b.coding);
  CHECK(a.timeline.length == 5000);
  for (std::int64_t t = 0; t < 5000; ++t)
    if (a.timeline.commit_at[t]) REQUIRE(a.coding[t] == 1);
}

TEST_CASE("metronome commits on the hour during work hours") {
  auto tl = metronome_timeline(2, 60);
  REQUIRE(tl.commit_count() > 0);
  for (auto m : tl.commit_minutes) {
    std::int64_t e = tl.window_start + m;
    CHECK(weekday(e) < 5);
    CHECK(hour_of(e) >= 9);
    CHECK(hour_of(e) < 17);
  }
  for (std::size_t i = 1; i < tl.commit_minutes.size(); ++i) {
    auto gap = tl.commit_minutes[i] - tl.commit_minutes[i - 1];
    CHECK((gap == 60 || gap > 600));
  }
}
