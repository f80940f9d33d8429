#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "stdcoder/mdn.hpp"
#include "support/fixture_repo.hpp"

using namespace stdcoder;
using namespace stdcoder::mdn;

namespace {

double normal_pdf(double x, double mu, double sigma) {
  double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi));
}

MixturePrediction random_mixture(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MixturePrediction m;
  double total = 0;
  for (int i = 0; i < k; ++i) {
    m.pi.push_back(u(rng) + 0.05);
    m.mu.push_back(2.0 * u(rng) - 0.5);
    m.sigma.push_back(0.02 + 0.5 * u(rng));
    total += m.pi.back();
  }
  for (auto& p : m.pi) p /= total;
  return m;
}

// Simpson's rule on the mixture density.
double integrated_truncated_mean(const MixturePrediction& m, double a, double b) {
  const int n = 20000;
  double h = (b - a) / n, mass = 0, first = 0;
  for (int i = 0; i <= n; ++i) {
    double x = a + i * h;
    double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    double f = 0;
    for (std::size_t k = 0; k < m.size(); ++k) f += m.pi[k] * normal_pdf(x, m.mu[k], m.sigma[k]);
    mass += w * f;
    first += w * f * x;
  }
  return first / mass;
}

MdnModel small_model(int width, std::uint64_t seed) {
  auto m = MdnModel::create(width, {7, 5}, 3, 1e-3, seed);
  m.feature_mean.assign(width, 0.0);
  m.feature_scale.assign(width, 1.0);
  return m;
}

}  // namespace

TEST_CASE("mixture loss against a direct density sum") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_mixture(rng, 1 + trial % 6);
    double y = static_cast<double>(trial % 10) / 5.0 - 0.3;
    double density = 0;
    for (std::size_t k = 0; k < m.size(); ++k) density += m.pi[k] * normal_pdf(y, m.mu[k], m.sigma[k]);
    CHECK(mdn_loss(m, y) == doctest::Approx(-std::log(density)).epsilon(1e-10));
  }
}

TEST_CASE("truncated mixture mean") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = random_mixture(rng, 1 + trial % 5);
    CHECK(truncated_mixture_mean(m, 0, 1) == doctest::Approx(integrated_truncated_mean(m, 0, 1)).epsilon(1e-6));
    CHECK(truncated_mixture_mean(m, -0.2, 0.3) ==
          doctest::Approx(integrated_truncated_mean(m, -0.2, 0.3)).epsilon(1e-6));
    CHECK(truncated_mixture_mean(m, -kInf, kInf) == doctest::Approx(m.mean()).epsilon(1e-12));
    double v = truncated_mixture_mean(m, 0, 1);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  MixturePrediction far{{1.0}, {40.0}, {0.01}};
  CHECK_THROWS_AS(truncated_mixture_mean(far, 0, 1), DataError);
  CHECK_THROWS_AS(truncated_mixture_mean(far, 1, 1), DataError);

  MixturePrediction spike{{1.0}, {0.5}, {1e-6}};
  CHECK(truncated_mixture_mean(spike, 0, 1) == doctest::Approx(0.5).epsilon(1e-9));

  // rejection sampling of a standard normal onto [0, 1]
  std::mt19937_64 draw(3);
  std::normal_distribution<double> n01;
  double sum = 0;
  std::size_t kept = 0;
  for (int i = 0; i < 4'000'000; ++i) {
    double x = n01(draw);
    if (x >= 0 && x <= 1) {
      sum += x;
      ++kept;
    }
  }
  MixturePrediction unit{{1.0}, {0.0}, {1.0}};
  CHECK(std::abs(truncated_mixture_mean(unit, 0, 1) - sum / static_cast<double>(kept)) < 1e-3);

  auto m = random_mixture(rng, 4);
  double prev = -1;
  for (double b = 0.05; b <= 3.0; b += 0.05) {
    double v = truncated_mixture_mean(m, 0, b);
    CHECK(v >= prev - 1e-12);
    CHECK(v <= b);
    prev = v;
  }
}

TEST_CASE("forward pass emits a valid mixture") {
  auto m = small_model(4, 3);
  std::vector<double> x{0.5, -1.0, 2.0, 0.0};
  auto pred = mdn_forward(m, x);
  REQUIRE(pred.size() == 3);
  double total = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    total += pred.pi[k];
    CHECK(pred.sigma[k] > m.sigma_floor);
  }
  CHECK(total == doctest::Approx(1.0));
  auto batch = mdn_forward_batch(m, x);
  CHECK(batch[0].mu == pred.mu);
  CHECK_THROWS_AS(mdn_forward(m, std::vector<double>{1.0}), DataError);
}

TEST_CASE("NLL gradient matches central differences") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  auto m = small_model(4, 5);
  std::vector<double> rows(6 * 4), targets(6);
  for (auto& v : rows) v = n01(rng);
  for (auto& t : targets) t = std::abs(n01(rng));
  auto g = nll_gradient(m, rows, targets);
  auto flat = m.pack();
  REQUIRE(g.gradient.size() == flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    auto f = flat;
    auto q = m;
    f[i] += 1e-6;
    q.unpack(f);
    double up = nll_gradient(q, rows, targets).loss;
    f[i] -= 2e-6;
    q.unpack(f);
    double down = nll_gradient(q, rows, targets).loss;
    double fd = (up - down) / 2e-6;
    REQUIRE(std::abs(g.gradient[i] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-2));
  }
}

TEST_CASE("OpenMP gradient agrees with the serial reference") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  auto m = MdnModel::create(12, {32, 16}, 5, 1e-3, 7);
  std::vector<double> rows(500 * 12), targets(500);
  for (auto& v : rows) v = n01(rng);
  for (auto& t : targets) t = std::abs(n01(rng));
  auto a = nll_gradient(m, rows, targets);
  auto b = reference::nll_gradient(m, rows, targets);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
  for (std::size_t i = 0; i < a.gradient.size(); ++i)
    REQUIRE(a.gradient[i] == doctest::Approx(b.gradient[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("serialization round-trip") {
  auto m = small_model(4, 8);
  m.feature_mean = {1, 2, 3, 4};
  m.feature_scale = {0.5, 1, 2, 4};
  m.dictionary_hash = 12345;
  auto bytes = serialize_model(m, {{"note", "x"}});
  auto back = deserialize_model(bytes);
  CHECK(back.pack() == m.pack());
  CHECK(back.hidden == m.hidden);
  CHECK(back.feature_scale == m.feature_scale);
  CHECK(back.dictionary_hash == 12345);
  CHECK(serialize_model(back, {{"note", "x"}}) == bytes);

  auto dir = fixture::temp_dir("mdn");
  save_model(m, (dir / "m.bin").string(), {{"note", "x"}});
  CHECK(read_model_header((dir / "m.bin").string())["note"] == "x");
  CHECK(load_model((dir / "m.bin").string()).pack() == m.pack());
  std::string missing = (dir / "missing.bin").string();
  try {
    load_model(missing);
    FAIL("no error for a missing model");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(missing) != std::string::npos);
  }
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("holdout keeps groups together") {
  MdnDataset data;
  data.width = 1;
  for (int g = 0; g < 300; ++g)
    for (int s = 0; s < 4; ++s) data.add(std::vector<double>{static_cast<double>(g)}, 0.1, "c" + std::to_string(g));
  auto mask = holdout_mask(data, 0.2, 3);
  std::size_t held = 0;
  for (int g = 0; g < 300; ++g) {
    for (int s = 1; s < 4; ++s) REQUIRE(mask[g * 4 + s] == mask[g * 4]);
    CHECK(mask[g * 4] == in_holdout("c" + std::to_string(g), 0.2, 3));
    held += mask[g * 4];
  }
  CHECK(held > 30);
  CHECK(held < 90);
  CHECK(holdout_mask(data, 0.2, 3) == mask);
}

TEST_CASE("training lowers the loss") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  MdnDataset data;
  data.width = 2;
  for (int i = 0; i < 2000; ++i) {
    double x = std::abs(n01(rng));
    data.add(std::vector<double>{x, n01(rng)}, 0.2 * x + 0.05 * std::abs(n01(rng)), std::to_string(i));
  }
  MdnTrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.components = 3;
  cfg.epochs = 15;
  cfg.batch_size = 128;
  auto r = train_mdn(data, cfg);
  REQUIRE(r.train_loss.size() == 15);
  CHECK(r.train_loss.back() < r.train_loss.front());
  CHECK(r.holdout_loss.back() < r.holdout_loss.front());
  CHECK(r.train_rows.size() + r.holdout_rows.size() == 2000);
  CHECK(train_mdn(data, cfg).model.pack() == r.model.pack());
}

TEST_CASE("degenerate and hand-set models") {
  auto z = MdnModel::zeros(3, {4}, 20, 1e-3);
  auto pred = mdn_forward(z, std::vector<double>{1, 2, 3});
  for (int k = 0; k < 20; ++k) {
    CHECK(pred.pi[k] == doctest::Approx(0.05));
    CHECK(pred.mu[k] == pred.mu[0]);
    CHECK(pred.sigma[k] == pred.sigma[0]);
  }

  // one ReLU unit, two components
  auto m = MdnModel::zeros(2, {1}, 2, 1e-3);
  m.feature_mean = {1.0, 0.0};
  m.feature_scale = {2.0, 1.0};
  m.layers[0].weight = {0.5, -1.0};  // 2 x 1
  m.layers[0].bias = {0.25};
  // head row-major 1 x 6: logits, means, raw scales
  m.layers[1].weight = {1.0, -1.0, 0.3, 0.6, 0.0, -0.5};
  m.layers[1].bias = {0.0, 0.0, 0.1, 0.0, -1.0, -1.0};
  std::vector<double> x{3.0, -0.5};
  double h = std::max(0.0, 0.5 * (3.0 - 1.0) / 2.0 - 1.0 * -0.5 + 0.25);  // 1.25
  auto p = mdn_forward(m, x);
  double e0 = std::exp(h), e1 = std::exp(-h);
  CHECK(p.pi[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-14));
  CHECK(p.mu[0] == doctest::Approx(0.3 * h + 0.1).epsilon(1e-14));
  CHECK(p.mu[1] == doctest::Approx(0.6 * h).epsilon(1e-14));
  CHECK(p.sigma[0] == doctest::Approx(1e-3 + std::exp(-1.0)).epsilon(1e-14));
  CHECK(p.sigma[1] == doctest::Approx(1e-3 + std::exp(-0.5 * h - 1.0)).epsilon(1e-14));
  // negative pre-activation is cut at zero
  auto q = mdn_forward(m, std::vector<double>{-9.0, 5.0});
  CHECK(q.pi[0] == doctest::Approx(0.5));
  CHECK(q.mu[0] == doctest::Approx(0.1));
}

TEST_CASE("swapping head slots swaps mixture components") {
  auto m = MdnModel::create(3, {8}, 4, 1e-3, 11);
  auto swapped = m;
  auto& head = swapped.layers.back();
  auto swap_columns = [&](int a, int b) {
    for (int i = 0; i < head.in; ++i) std::swap(head.weight[i * head.out + a], head.weight[i * head.out + b]);
    std::swap(head.bias[a], head.bias[b]);
  };
  for (int block = 0; block < 3; ++block) swap_columns(block * 4 + 0, block * 4 + 2);
  std::vector<double> x{0.3, -1.2, 2.0};
  auto a = mdn_forward(m, x), b = mdn_forward(swapped, x);
  std::vector<int> perm{2, 1, 0, 3};
  for (int k = 0; k < 4; ++k) {
    CHECK(b.pi[k] == doctest::Approx(a.pi[perm[k]]).epsilon(1e-14));
    CHECK(b.mu[k] == doctest::Approx(a.mu[perm[k]]).epsilon(1e-14));
    CHECK(b.sigma[k] == doctest::Approx(a.sigma[perm[k]]).epsilon(1e-14));
  }
  CHECK(truncated_mixture_mean(b, 0, 1) == doctest::Approx(truncated_mixture_mean(a, 0, 1)).epsilon(1e-12));
}

TEST_CASE("loss of simple mixtures") {
  MixturePrediction one{{1.0}, {0.4}, {1.0}};
  CHECK(mdn_loss(one, 0.4) == doctest::Approx(std::log(std::sqrt(2 * std::numbers::pi))).epsilon(1e-12));
  MixturePrediction twin{{0.5, 0.5}, {0.4, 0.4}, {0.7, 0.7}};
  MixturePrediction single{{1.0}, {0.4}, {0.7}};
  CHECK(mdn_loss(twin, 1.3) == doctest::Approx(mdn_loss(single, 1.3)).epsilon(1e-14));
  // far tail stays finite
  CHECK(std::isfinite(mdn_loss(single, 1e3)));
}

TEST_CASE("training descends on an easy problem") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  MdnDataset data;
  data.width = 3;
  for (int i = 0; i < 3000; ++i) {
    double a = n01(rng), b = n01(rng);
    data.add(std::vector<double>{a, b, n01(rng)}, std::abs(0.5 + 0.2 * a - 0.1 * b + 0.05 * n01(rng)));
  }
  MdnTrainConfig cfg;
  cfg.hidden = {32, 32};
  cfg.components = 4;
  cfg.epochs = 10;
  cfg.batch_size = 64;
  auto r = train_mdn(data, cfg);
  for (std::size_t e = 1; e < r.train_loss.size(); ++e) CHECK(r.train_loss[e] < r.train_loss[e - 1]);
  CHECK_THROWS_AS(train_mdn(MdnDataset{}, cfg), DataError);
}

TEST_CASE("bimodal targets use more than one component") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n01;
  MdnDataset data;
  data.width = 1;
  for (int i = 0; i < 4000; ++i) {
    double x = uniform01(rng);
    double y = uniform01(rng) < 0.5 ? 0.1 + 0.1 * x : 0.9 - 0.1 * x;
    data.add(std::vector<double>{x}, y + 0.02 * n01(rng));
  }
  MdnTrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.components = 5;
  cfg.epochs = 30;
  cfg.batch_size = 128;
  cfg.learning_rate = 3e-3;
  auto r = train_mdn(data, cfg);
  for (double x : {0.2, 0.5, 0.8}) {
    auto p = mdn_forward(r.model, std::vector<double>{x});
    int heavy_low = 0, heavy_high = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p.pi[k] <= 0.1) continue;
      if (p.mu[k] < 0.5) ++heavy_low;
      else ++heavy_high;
    }
    CHECK(heavy_low >= 1);
    CHECK(heavy_high >= 1);
  }
}

namespace {

// EM fit of a constant K-component Gaussian mixture.
MixturePrediction fit_constant_mixture(const std::vector<double>& y, int k) {
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  MixturePrediction m;
  for (int i = 0; i < k; ++i) {
    m.pi.push_back(1.0 / k);
    m.mu.push_back(sorted[(2 * i + 1) * sorted.size() / (2 * k)]);
    m.sigma.push_back(0.2);
  }
  std::vector<double> resp(y.size() * k);
  for (int iter = 0; iter < 300; ++iter) {
    for (std::size_t n = 0; n < y.size(); ++n) {
      double total = 0;
      for (int i = 0; i < k; ++i) total += resp[n * k + i] = m.pi[i] * normal_pdf(y[n], m.mu[i], m.sigma[i]);
      for (int i = 0; i < k; ++i) resp[n * k + i] /= std::max(total, 1e-300);
    }
    for (int i = 0; i < k; ++i) {
      double w = 0, s = 0, ss = 0;
      for (std::size_t n = 0; n < y.size(); ++n) {
        w += resp[n * k + i];
        s += resp[n * k + i] * y[n];
      }
      double mu = s / w;
      for (std::size_t n = 0; n < y.size(); ++n) ss += resp[n * k + i] * (y[n] - mu) * (y[n] - mu);
      m.pi[i] = w / static_cast<double>(y.size());
      m.mu[i] = mu;
      m.sigma[i] = std::max(std::sqrt(ss / w), 1e-3);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("shuffled labels do not beat a constant mixture") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n01;
  MdnDataset data;
  data.width = 4;
  std::vector<double> ys;
  for (int i = 0; i < 4000; ++i) {
    std::vector<double> x{n01(rng), n01(rng), n01(rng), n01(rng)};
    ys.push_back(std::abs(0.3 * x[0] + 0.2 * n01(rng)));
    data.add(x, 0.0, std::to_string(i));
  }
  std::shuffle(ys.begin(), ys.end(), rng);
  data.targets = ys;

  MdnTrainConfig cfg;
  cfg.hidden = {32, 32};
  cfg.components = 3;
  cfg.epochs = 20;
  cfg.batch_size = 128;
  cfg.holdout_fraction = 0.25;
  auto r = train_mdn(data, cfg);
  std::vector<double> train_y;
  for (auto i : r.train_rows) train_y.push_back(ys[i]);
  auto constant = fit_constant_mixture(train_y, 3);
  double baseline = 0;
  for (auto i : r.holdout_rows) baseline += mdn_loss(constant, ys[i]);
  baseline /= static_cast<double>(r.holdout_rows.size());
  // a little slack for sampling noise between the two fits
  CHECK(r.holdout_loss.back() >= baseline - 0.02);
}
