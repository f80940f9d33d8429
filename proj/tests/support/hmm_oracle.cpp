#include "support/hmm_oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace stdcoder;
using namespace stdcoder::hmm;

namespace oracle {

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

std::pair<double, double> transition(const HmmParams& p, const TimeFeatures& x) {
  double z[2] = {p.b2[0], p.b2[1]};
  for (int h = 0; h < p.hidden; ++h) {
    double a = p.b1[h];
    for (int i = 0; i < 5; ++i) a += p.w1[h * 5 + i] * x[i];
    a = std::tanh(a);
    z[0] += p.w2[h] * a;
    z[1] += p.w2[p.hidden + h] * a;
  }
  auto clamp = [&](double v) { return p.epsilon + (1 - 2 * p.epsilon) * sigmoid(v); };
  return {clamp(z[0]), clamp(z[1])};
}

TimeFeatures clock(std::int64_t m, double normed) {
  double of_day = static_cast<double>(((m % 1440) + 1440) % 1440);
  std::int64_t day = m >= 0 ? m / 1440 : -((-m + 1439) / 1440);
  double weekday = static_cast<double>(((day + 3) % 7 + 7) % 7);  // epoch day 0 was a Thursday
  const double tau = 2 * std::numbers::pi;
  double week = weekday * 1440 + of_day;
  return {std::sin(tau * of_day / 1440), std::cos(tau * of_day / 1440), std::sin(tau * week / 10080),
          std::cos(tau * week / 10080), normed};
}

PathSum enumerate_paths(const DeveloperTimeline& tl, const HmmParams& p) {
  const auto T = static_cast<std::size_t>(tl.length);
  std::vector<std::pair<double, double>> se(T);
  for (std::size_t t = 0; t < T; ++t)
    se[t] = transition(p, clock(tl.window_start + static_cast<std::int64_t>(t),
                                static_cast<double>(t) / static_cast<double>(T)));
  const double c = p.epsilon + (1 - 2 * p.epsilon) * sigmoid(p.commit_logit);
  double total = 0.0;
  std::vector<double> coding(T, 0.0);
  for (std::uint64_t path = 0; path < (1ULL << T); ++path) {
    auto coding_at = [&](std::size_t t) { return ((path >> t) & 1ULL) != 0; };
    double pi0 = se[0].first / (se[0].first + se[0].second);
    double w = coding_at(0) ? pi0 : 1 - pi0;
    for (std::size_t t = 0; t < T && w > 0; ++t) {
      if (t > 0) {
        auto [s, e] = se[t];
        bool prev = coding_at(t - 1), cur = coding_at(t);
        w *= prev ? (cur ? 1 - e : e) : (cur ? s : 1 - s);
      }
      bool obs = tl.commit_at[t] != 0;
      w *= coding_at(t) ? (obs ? c : 1 - c) : (obs ? 0.0 : 1.0);
    }
    total += w;
    for (std::size_t t = 0; t < T; ++t)
      if (coding_at(t)) coding[t] += w;
  }
  for (auto& v : coding) v /= total;
  return {std::log(total), coding};
}

HmmParams random_params(std::uint64_t seed, int hidden) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto p = HmmParams::zeros(hidden);
  for (auto& w : p.w1) w = u(rng);
  for (auto& w : p.b1) w = u(rng);
  for (auto& w : p.w2) w = 2 * u(rng);
  p.b2 = {u(rng) - 1.0, u(rng) - 1.0};
  p.commit_logit = u(rng) - 0.5;
  return p;
}

DeveloperTimeline random_timeline(std::uint64_t seed, std::int64_t length, double rate) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> start(0, 50'000'000);
  std::int64_t window_start = start(rng);
  std::vector<std::int64_t> minutes;
  for (std::int64_t t = 0; t < length; ++t)
    if (uniform01(rng) < rate) minutes.push_back(t);
  return make_timeline("dev", window_start, length, minutes);
}

}  // namespace oracle
