// OpenMP kernels for the neural HMM. Per-minute network evaluation and
// backpropagation are data-parallel; reductions use a fixed chunking so the
// result does not depend on the thread count.
#include <algorithm>

#include "detail.hpp"

namespace stdcoder::hmm {

namespace {
constexpr std::int64_t kChunk = 2048;
}

TransitionSeries transition_series(const HmmParams& params, const DeveloperTimeline& timeline) {
  const std::int64_t n_steps = timeline.length;
  TransitionSeries series;
  series.start.resize(static_cast<std::size_t>(n_steps));
  series.end.resize(static_cast<std::size_t>(n_steps));
  series.commit_prob = params.commit_prob();
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n_steps; ++t) {
    auto tr = detail::eval_net(params, time_features(t, timeline));
    series.start[static_cast<std::size_t>(t)] = tr.start;
    series.end[static_cast<std::size_t>(t)] = tr.end;
  }
  return series;
}

std::vector<double> feature_matrix(const DeveloperTimeline& timeline) {
  std::vector<double> feats(static_cast<std::size_t>(timeline.length) * kTimeFeatures);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < timeline.length; ++t) {
    auto x = time_features(t, timeline);
    std::copy(x.begin(), x.end(), feats.begin() + t * static_cast<std::int64_t>(kTimeFeatures));
  }
  return feats;
}

LikelihoodGradient log_likelihood_gradient(const DeveloperTimeline& timeline, const HmmParams& params) {
  return log_likelihood_gradient(timeline, params, feature_matrix(timeline));
}

LikelihoodGradient log_likelihood_gradient(const DeveloperTimeline& timeline, const HmmParams& params,
                                           std::span<const double> feats) {
  const std::int64_t n_steps = timeline.length;
  const auto h = static_cast<std::size_t>(params.hidden);
  const auto steps = static_cast<std::size_t>(n_steps);
  if (feats.size() != steps * kTimeFeatures) throw DataError("feature matrix does not match timeline");
  std::vector<double> hidden(steps * h);
  std::vector<double> sig(steps * 2);
  TransitionSeries series;
  series.start.resize(steps);
  series.end.resize(steps);
  series.commit_prob = params.commit_prob();

#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n_steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    TimeFeatures x;
    std::copy_n(feats.begin() + static_cast<std::ptrdiff_t>(i * kTimeFeatures), kTimeFeatures, x.begin());
    auto tr = detail::eval_net(params, x, &hidden[i * h], &sig[i * 2]);
    series.start[i] = tr.start;
    series.end[i] = tr.end;
  }

  auto fb = detail::run_forward(series, timeline.commit_at);
  detail::run_backward(series, timeline.commit_at, fb);
  auto sg = detail::series_gradient(series, timeline.commit_at, fb);

  const std::size_t n_params = params.parameter_count();
  const std::size_t off_b1 = h * kTimeFeatures;
  const std::size_t off_w2 = off_b1 + h;
  const std::size_t off_b2 = off_w2 + 2 * h;
  const double span = 1.0 - 2.0 * params.epsilon;
  const std::int64_t n_chunks = (n_steps + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(n_chunks));

#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    std::vector<double> g(n_params, 0.0);
    std::vector<double> dh(h);
    const std::int64_t t_end = std::min(n_steps, (c + 1) * kChunk);
    for (std::int64_t t = c * kChunk; t < t_end; ++t) {
      const auto i = static_cast<std::size_t>(t);
      const double* hk = &hidden[i * h];
      const double* x = &feats[i * kTimeFeatures];
      const double s0 = sig[2 * i];
      const double s1 = sig[2 * i + 1];
      const double dz0 = sg.d_start[i] * span * s0 * (1.0 - s0);
      const double dz1 = sg.d_end[i] * span * s1 * (1.0 - s1);
      g[off_b2] += dz0;
      g[off_b2 + 1] += dz1;
      for (std::size_t k = 0; k < h; ++k) {
        g[off_w2 + k] += dz0 * hk[k];
        g[off_w2 + h + k] += dz1 * hk[k];
        dh[k] = (dz0 * params.w2[k] + dz1 * params.w2[h + k]) * (1.0 - hk[k] * hk[k]);
      }
      for (std::size_t k = 0; k < h; ++k) {
        g[off_b1 + k] += dh[k];
        double* gw = &g[k * kTimeFeatures];
        for (std::size_t j = 0; j < kTimeFeatures; ++j) gw[j] += dh[k] * x[j];
      }
    }
    partial[static_cast<std::size_t>(c)] = std::move(g);
  }

  LikelihoodGradient out;
  out.log_likelihood = fb.log_likelihood;
  out.gradient.assign(n_params, 0.0);
  for (const auto& g : partial)
    for (std::size_t k = 0; k < n_params; ++k) out.gradient[k] += g[k];
  const double sc = detail::logistic(params.commit_logit);
  out.gradient[n_params - 1] = sg.d_commit_prob * span * sc * (1.0 - sc);
  return out;
}

std::vector<double> sample_coding_times(const TransitionSeries& series, const CodingPosterior& posterior,
                                        std::int64_t a, std::int64_t b, std::size_t n, std::uint64_t seed) {
  if (a < -1 || b >= static_cast<std::int64_t>(posterior.smoothed.size()))
    throw DataError("interval outside the timeline");
  std::vector<double> out(n);
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < n; ++k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    out[k] = static_cast<double>(detail::sample_segment(series, posterior.filtered, posterior.smoothed, a, b, rng)) /
             60.0;
  }
  return out;
}

}  // namespace stdcoder::hmm
