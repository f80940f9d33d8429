#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace stdcoder::stats {

enum class CorrelationMethod { pearson, spearman };

struct CorrelationReport {
  CorrelationMethod method = CorrelationMethod::pearson;
  double coefficient = 0.0;
  std::size_t n = 0;
  double p_value = 0.0;  // two-sided t approximation; NaN when n < 3
  double slope = 0.0;    // least-squares slope of y on x (Pearson only; NaN otherwise)

  nlohmann::json to_json() const;
};

// Throws DataError on length mismatch, n < 2, or a constant vector.
CorrelationReport pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks.
CorrelationReport spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> midranks(std::span<const double> v);

// Exact two-tailed test: twice the smaller tail at `successes`, capped at 1.
double binomial_sign_test(std::size_t successes, std::size_t n, double p0 = 0.5);
// P(X in outcomes) for X ~ Binomial(n, p).
double binomial_set_probability(std::size_t n, double p, std::span<const std::size_t> outcomes);

// Two-tailed bootstrap p-value for mean(ab) - mean(ba) != 0. Each resample
// draws both samples with replacement; p = 2 * (crossings + 1) / (B + 1),
// capped at 1, where crossings counts the resampled differences on the far
// side of zero from the majority.
double bootstrap_mean_difference(std::span<const double> deltas_ab, std::span<const double> deltas_ba,
                                 std::size_t resamples, std::uint64_t seed);

struct WilcoxonResult {
  std::size_t n_nonzero = 0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

// Paired signed-rank test with zeros dropped, average ranks for ties and the
// tie-corrected normal approximation. Needs at least 6 nonzero deltas.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> deltas);

double mean(std::span<const double> v);
// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> v, double q);
double normal_two_sided_p(double z);

}  // namespace stdcoder::stats
