// Serial reference vs OpenMP kernels on pipeline-sized inputs.
// Usage: bench_kernels [repeats]
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "stdcoder/hmm.hpp"
#include "stdcoder/mdn.hpp"
#include "stdcoder/simulator.hpp"
#include "stdcoder/stats.hpp"

using namespace stdcoder;

namespace {

double median_ms(int repeats, const std::function<void()>& fn) {
  std::vector<double> ms;
  for (int i = 0; i < repeats; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
  return ms[ms.size() / 2];
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-38s %12.2f %12.2f %8.2fx\n", name, serial, parallel, serial / parallel);
}

volatile double sink = 0;

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
  const int threads = omp_get_max_threads();
  std::printf("threads %d, median of %d runs\n", threads, repeats);
  std::printf("%-38s %12s %12s %9s\n", "kernel", "serial ms", "openmp ms", "speedup");

  // 8 weeks of minutes
  auto sim = sim::simulate_developer(sim::default_scenario(8), 1);
  auto params = hmm::HmmParams::initial(16, 1e-4, 2);
  auto features = hmm::feature_matrix(sim.timeline);
  row("hmm log-likelihood gradient",
      median_ms(repeats, [&] { sink = hmm::reference::log_likelihood_gradient(sim.timeline, params).log_likelihood; }),
      median_ms(repeats, [&] { sink = hmm::log_likelihood_gradient(sim.timeline, params, features).log_likelihood; }));

  auto series = hmm::transition_series(params, sim.timeline);
  auto post = hmm::forward_backward(series, sim.timeline.commit_at);
  const auto& cm = sim.timeline.commit_minutes;
  row("hmm posterior samples (200/interval)",
      median_ms(repeats,
                [&] {
                  for (std::size_t i = 1; i < cm.size(); ++i)
                    sink = hmm::reference::sample_coding_times(series, post, cm[i - 1], cm[i], 200, i)[0];
                }),
      median_ms(repeats, [&] {
        for (std::size_t i = 1; i < cm.size(); ++i)
          sink = hmm::sample_coding_times(series, post, cm[i - 1], cm[i], 200, i)[0];
      }));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  auto model = mdn::MdnModel::create(116, {128, 128}, 5, 1e-3, 4);
  std::vector<double> rows(1024 * 116), targets(1024);
  for (auto& v : rows) v = n01(rng);
  for (auto& t : targets) t = std::abs(n01(rng));
  row("mdn gradient (batch 1024)",
      median_ms(repeats, [&] { sink = mdn::reference::nll_gradient(model, rows, targets).loss; }),
      median_ms(repeats, [&] { sink = mdn::nll_gradient(model, rows, targets).loss; }));

  // The bootstrap has one kernel; compare one thread against all of them.
  std::vector<double> ab(5000), ba(5000);
  for (auto& v : ab) v = n01(rng);
  for (auto& v : ba) v = n01(rng) + 0.01;
  auto boot = [&] { sink = stats::bootstrap_mean_difference(ab, ba, 2000, 7); };
  omp_set_num_threads(1);
  double one = median_ms(repeats, boot);
  omp_set_num_threads(threads);
  row("bootstrap (2000 resamples, 1 thread)", one, median_ms(repeats, boot));
  return 0;
}
