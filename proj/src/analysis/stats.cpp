#include "stdcoder/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "stdcoder/common.hpp"

namespace stdcoder::stats {

nlohmann::json CorrelationReport::to_json() const {
  nlohmann::json j = {{"method", method == CorrelationMethod::pearson ? "pearson" : "spearman"},
                      {"coefficient", coefficient},
                      {"n", n}};
  j["p_value"] = std::isnan(p_value) ? nlohmann::json(nullptr) : nlohmann::json(p_value);
  if (method == CorrelationMethod::pearson) j["slope"] = slope;
  return j;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw DataError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DataError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace {

double t_test_p(double r, std::size_t n) {
  if (n < 3) return std::nan("");
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

}  // namespace

CorrelationReport pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  if (x.size() < 2) throw DataError("correlation needs at least two points");
  // Exact test: the mean of a constant vector can round away from its value.
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (constant(x) || constant(y)) throw DataError("correlation is undefined for a constant vector");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("correlation is undefined for a constant vector");
  CorrelationReport rep;
  rep.method = CorrelationMethod::pearson;
  rep.n = x.size();
  rep.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  rep.slope = sxy / sxx;
  rep.p_value = t_test_p(rep.coefficient, rep.n);
  return rep;
}

std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

CorrelationReport spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  auto rx = midranks(x);
  auto ry = midranks(y);
  CorrelationReport rep = pearson(rx, ry);
  rep.method = CorrelationMethod::spearman;
  rep.slope = std::nan("");
  return rep;
}

double binomial_sign_test(std::size_t successes, std::size_t n, double p0) {
  if (n == 0) throw DataError("binomial test needs n > 0");
  if (successes > n) throw DataError("binomial test successes exceed n");
  if (!(p0 > 0.0 && p0 < 1.0)) throw DataError("binomial test p0 must lie in (0, 1)");
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), p0);
  const double k = static_cast<double>(successes);
  const double lower = boost::math::cdf(dist, k);
  const double upper = successes == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, k - 1.0));
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

double binomial_set_probability(std::size_t n, double p, std::span<const std::size_t> outcomes) {
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
  std::vector<std::size_t> uniq(outcomes.begin(), outcomes.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  double total = 0.0;
  for (auto k : uniq)
    if (k <= n) total += boost::math::pdf(dist, static_cast<double>(k));
  return total;
}

double bootstrap_mean_difference(std::span<const double> ab, std::span<const double> ba, std::size_t resamples,
                                 std::uint64_t seed) {
  if (ab.empty() || ba.empty()) throw DataError("bootstrap needs two nonempty samples");
  if (resamples == 0) throw DataError("bootstrap needs at least one resample");
  const auto n_resamples = static_cast<std::int64_t>(resamples);
  std::int64_t at_or_below = 0;
  std::int64_t at_or_above = 0;
#pragma omp parallel for schedule(static) reduction(+ : at_or_below, at_or_above)
  for (std::int64_t b = 0; b < n_resamples; ++b) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    auto draw_mean = [&](std::span<const double> s) {
      double sum = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        sum += s[std::min(s.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(s.size())))];
      return sum / static_cast<double>(s.size());
    };
    const double d = draw_mean(ab) - draw_mean(ba);
    if (d <= 0.0) ++at_or_below;
    if (d >= 0.0) ++at_or_above;
  }
  const double crossings = static_cast<double>(std::min(at_or_below, at_or_above));
  return std::min(1.0, 2.0 * (crossings + 1.0) / (static_cast<double>(resamples) + 1.0));
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> deltas) {
  std::vector<double> nz;
  for (double d : deltas)
    if (d != 0.0) nz.push_back(d);
  if (nz.empty()) throw DataError("Wilcoxon test: all deltas are zero");
  if (nz.size() < 6) throw DataError("Wilcoxon test needs at least 6 nonzero deltas");
  std::vector<double> mags(nz.size());
  for (std::size_t i = 0; i < nz.size(); ++i) mags[i] = std::abs(nz[i]);
  auto ranks = midranks(mags);
  WilcoxonResult res;
  res.n_nonzero = nz.size();
  for (std::size_t i = 0; i < nz.size(); ++i) (nz[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];
  const double n = static_cast<double>(nz.size());
  // Tie correction from the groups of equal magnitudes.
  std::sort(mags.begin(), mags.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < mags.size();) {
    std::size_t j = i;
    while (j < mags.size() && mags[j] == mags[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double expected = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  res.z = var > 0.0 ? (res.w_plus - expected) / std::sqrt(var) : 0.0;
  res.p_value = std::min(1.0, normal_two_sided_p(res.z));
  return res;
}

}  // namespace stdcoder::stats
