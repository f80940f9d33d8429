#include <doctest.h>

#include <cmath>
#include <random>

#include "stdcoder/common.hpp"
#include "stdcoder/stats.hpp"

using namespace stdcoder;
using namespace stdcoder::stats;

namespace {

double direct_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double choose(int n, int k) {
  double c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

TEST_CASE("Pearson") {
  std::vector<double> x{1, 2, 3, 4, 5}, y;
  for (double v : x) y.push_back(2 * v + 1);
  auto r = pearson(x, y);
  CHECK(r.coefficient == doctest::Approx(1.0));
  CHECK(r.slope == doctest::Approx(2.0));
  CHECK(r.n == 5);
  std::vector<double> neg{-1, -2, -3, -4, -5};
  CHECK(pearson(x, neg).coefficient == doctest::Approx(-1.0));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(50), b(50);
    for (int i = 0; i < 50; ++i) {
      a[i] = n01(rng);
      b[i] = 0.4 * a[i] + n01(rng);
    }
    auto rep = pearson(a, b);
    CHECK(rep.coefficient == doctest::Approx(direct_pearson(a, b)).epsilon(1e-12));
    CHECK(rep.coefficient >= -1.0);
    CHECK(rep.coefficient <= 1.0);
    CHECK(rep.p_value >= 0.0);
    CHECK(rep.p_value <= 1.0);
  }
  CHECK_THROWS_AS(pearson(x, std::vector<double>(5, 3.0)), DataError);
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), DataError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), DataError);
}

TEST_CASE("Spearman") {
  std::vector<double> x{1, 2, 3};
  CHECK(spearman(x, std::vector<double>{10, 20, 30}).coefficient == doctest::Approx(1.0));
  CHECK(spearman(x, std::vector<double>{30, 20, 10}).coefficient == doctest::Approx(-1.0));
  // ranks (1, 2.5, 2.5, 4) and (1, 3, 2, 4): cov 4.5, variances 4.5 and 5
  auto tied = spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 3, 2, 4});
  CHECK(tied.coefficient == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)).epsilon(1e-12));
  CHECK(midranks(std::vector<double>{5, 1, 5, 5, 0}) == std::vector<double>{4, 2, 4, 4, 1});
  CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 1, 1}), DataError);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  std::vector<double> a(80), b(80), ta(80), tb(80);
  for (int i = 0; i < 80; ++i) {
    a[i] = n01(rng);
    b[i] = a[i] + n01(rng);
    ta[i] = std::exp(3 * a[i]);
    tb[i] = -1.0 / (10 + b[i]);
  }
  CHECK(spearman(ta, tb).coefficient == doctest::Approx(spearman(a, b).coefficient).epsilon(1e-12));
}

TEST_CASE("exact binomial tails") {
  std::vector<std::size_t> flags{0, 1, 9, 10};
  CHECK(binomial_set_probability(10, 0.5, flags) == doctest::Approx(22.0 / 1024.0).epsilon(1e-14));
  CHECK(binomial_sign_test(5, 10) == 1.0);
  CHECK(binomial_sign_test(10, 10) == doctest::Approx(2.0 / 1024.0).epsilon(1e-14));
  CHECK(binomial_sign_test(0, 10) == doctest::Approx(2.0 / 1024.0).epsilon(1e-14));
  // two tails at 3 of 20 under p0 = 0.3, by direct coefficient sums
  double lower = 0;
  for (int k = 0; k <= 3; ++k) lower += choose(20, k) * std::pow(0.3, k) * std::pow(0.7, 20 - k);
  double upper = 0;
  for (int k = 3; k <= 20; ++k) upper += choose(20, k) * std::pow(0.3, k) * std::pow(0.7, 20 - k);
  CHECK(binomial_sign_test(3, 20, 0.3) == doctest::Approx(std::min(1.0, 2 * std::min(lower, upper))).epsilon(1e-12));
  CHECK_THROWS_AS(binomial_sign_test(0, 0), DataError);
  CHECK_THROWS_AS(binomial_sign_test(4, 3), DataError);
}

TEST_CASE("bootstrap mean difference") {
  std::vector<double> same{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  CHECK(bootstrap_mean_difference(same, same, 20000, 1) > 0.9);
  std::vector<double> plus(30, 1.0), minus(30, -1.0);
  CHECK(bootstrap_mean_difference(plus, minus, 100000, 2) < 1e-4);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> shifted(1000), base(1000);
  for (int i = 0; i < 1000; ++i) {
    shifted[i] = 0.5 + n01(rng);
    base[i] = n01(rng);
  }
  CHECK(bootstrap_mean_difference(shifted, base, 20000, 4) < 0.01);
  CHECK(bootstrap_mean_difference(shifted, base, 2000, 5) == bootstrap_mean_difference(shifted, base, 2000, 5));

  // a marginal planted shift: p moves little between seeds
  std::vector<double> weak(200), ref(200);
  for (int i = 0; i < 200; ++i) {
    weak[i] = 0.2 + n01(rng);
    ref[i] = n01(rng);
  }
  double p1 = bootstrap_mean_difference(weak, ref, 100000, 6);
  double p2 = bootstrap_mean_difference(weak, ref, 100000, 7);
  CHECK(std::abs(p1 - p2) <= 0.005);
  CHECK_THROWS_AS(bootstrap_mean_difference(std::vector<double>{}, ref, 10, 0), DataError);
}

TEST_CASE("Wilcoxon signed rank") {
  // |d| ranks 3,1,4,6,2,5,7 -> W+ = 25, W- = 3
  std::vector<double> d{1.5, -0.5, 2.0, 3.0, -1.0, 2.5, 4.0};
  auto w = wilcoxon_signed_rank(d);
  CHECK(w.w_plus == 25.0);
  CHECK(w.w_minus == 3.0);
  CHECK(w.n_nonzero == 7);
  CHECK(w.z == doctest::Approx(11.0 / std::sqrt(35.0)));
  CHECK(w.p_value == doctest::Approx(std::erfc(11.0 / std::sqrt(35.0) / std::sqrt(2.0))));

  std::vector<double> up(20);
  for (int i = 0; i < 20; ++i) up[i] = 0.1 * (i + 1);
  CHECK(wilcoxon_signed_rank(up).p_value < 0.001);

  std::vector<double> alternating;
  for (int i = 0; i < 20; ++i) alternating.push_back(i % 2 ? 1.0 : -1.0);
  auto alt = wilcoxon_signed_rank(alternating);
  CHECK(alt.w_plus == alt.w_minus);
  CHECK(alt.p_value == doctest::Approx(1.0));

  std::vector<double> with_zeros{0, 0, 1, 2, 3, 4, 5, -6};
  CHECK(wilcoxon_signed_rank(with_zeros).n_nonzero == 6);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>(8, 0.0)), DataError);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("quantile and mean") {
  std::vector<double> v{4, 1, 3, 2};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(mean(v) == 2.5);
  CHECK(normal_two_sided_p(0.0) == doctest::Approx(1.0));
  CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
}
