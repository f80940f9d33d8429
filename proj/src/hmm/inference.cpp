#include <algorithm>
#include <cmath>

#include "detail.hpp"

namespace stdcoder::hmm {

namespace detail {

ForwardBackward run_forward(const TransitionSeries& series, std::span<const std::uint8_t> obs) {
  const std::size_t n_steps = obs.size();
  if (n_steps == 0) throw DataError("empty timeline");
  if (series.start.size() != n_steps) throw DataError("transition series does not match timeline");
  const double c = series.commit_prob;
  ForwardBackward fb;
  fb.filtered.resize(n_steps);
  fb.norm.resize(n_steps);
  const double s0 = series.start[0];
  const double e0 = series.end[0];
  double f = 0.0;
  for (std::size_t t = 0; t < n_steps; ++t) {
    const double prior = t == 0 ? s0 / (s0 + e0) : f * (1.0 - series.end[t]) + (1.0 - f) * series.start[t];
    const bool commit = obs[t] != 0;
    const double u0 = prior * (commit ? c : 1.0 - c);
    const double u1 = commit ? 0.0 : 1.0 - prior;
    const double n = u0 + u1;
    if (!(n > 0.0)) throw DataError("observation sequence has zero likelihood");
    f = u0 / n;
    fb.filtered[t] = f;
    fb.norm[t] = n;
    fb.log_likelihood += std::log(n);
  }
  return fb;
}

void run_backward(const TransitionSeries& series, std::span<const std::uint8_t> obs, ForwardBackward& fb) {
  const std::size_t n_steps = obs.size();
  const double c = series.commit_prob;
  fb.beta0.assign(n_steps, 1.0);
  fb.beta1.assign(n_steps, 1.0);
  for (std::size_t t = n_steps - 1; t-- > 0;) {
    const bool commit = obs[t + 1] != 0;
    const double e0 = commit ? c : 1.0 - c;
    const double e1 = commit ? 0.0 : 1.0;
    const double s = series.start[t + 1];
    const double e = series.end[t + 1];
    const double n = fb.norm[t + 1];
    const double next0 = e0 * fb.beta0[t + 1];
    const double next1 = e1 * fb.beta1[t + 1];
    fb.beta0[t] = ((1.0 - e) * next0 + e * next1) / n;
    fb.beta1[t] = (s * next0 + (1.0 - s) * next1) / n;
  }
}

std::vector<double> smoothed_of(const ForwardBackward& fb) {
  std::vector<double> out(fb.filtered.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::clamp(fb.filtered[t] * fb.beta0[t], 0.0, 1.0);
  return out;
}

SeriesGradient series_gradient(const TransitionSeries& series, std::span<const std::uint8_t> obs,
                               const ForwardBackward& fb) {
  const std::size_t n_steps = obs.size();
  const double c = series.commit_prob;
  SeriesGradient g;
  g.d_start.assign(n_steps, 0.0);
  g.d_end.assign(n_steps, 0.0);
  for (std::size_t t = 0; t < n_steps; ++t) {
    const bool commit = obs[t] != 0;
    const double e0 = commit ? c : 1.0 - c;
    const double e1 = commit ? 0.0 : 1.0;
    const double n = fb.norm[t];
    const double b0 = e0 * fb.beta0[t] / n;
    const double b1 = e1 * fb.beta1[t] / n;
    if (t == 0) {
      const double s = series.start[0];
      const double e = series.end[0];
      const double d_pi = b0 - b1;
      const double denom = (s + e) * (s + e);
      g.d_start[0] = d_pi * e / denom;
      g.d_end[0] = -d_pi * s / denom;
    } else {
      const double a0 = fb.filtered[t - 1];
      const double a1 = 1.0 - a0;
      g.d_end[t] = a0 * (b1 - b0);
      g.d_start[t] = a1 * (b0 - b1);
    }
    const double gamma0 = fb.filtered[t] * fb.beta0[t];
    g.d_commit_prob += gamma0 * (commit ? 1.0 / c : -1.0 / (1.0 - c));
  }
  return g;
}

}  // namespace detail

CodingPosterior forward_backward(const TransitionSeries& series, std::span<const std::uint8_t> commit_at) {
  auto fb = detail::run_forward(series, commit_at);
  detail::run_backward(series, commit_at, fb);
  CodingPosterior post;
  post.smoothed = detail::smoothed_of(fb);
  post.filtered = std::move(fb.filtered);
  post.log_likelihood = fb.log_likelihood;
  return post;
}

CodingPosterior forward_backward(const DeveloperTimeline& timeline, const HmmParams& params) {
  return forward_backward(transition_series(params, timeline), timeline.commit_at);
}

std::vector<double> filtered_probs(const DeveloperTimeline& timeline, const HmmParams& params) {
  return detail::run_forward(transition_series(params, timeline), timeline.commit_at).filtered;
}

double expected_coding_time(const CodingPosterior& posterior, std::int64_t a, std::int64_t b) {
  if (b <= a) return 0.0;
  if (a < -1 || b >= static_cast<std::int64_t>(posterior.smoothed.size()))
    throw DataError("interval outside the timeline");
  double sum = 0.0;
  for (std::int64_t t = std::max<std::int64_t>(a + 1, 0); t <= b; ++t) sum += posterior.smoothed[static_cast<std::size_t>(t)];
  return sum / 60.0;
}

std::vector<double> sample_coding_times(const DeveloperTimeline& timeline, const HmmParams& params,
                                        std::int64_t a, std::int64_t b, std::size_t n, std::uint64_t seed) {
  auto series = transition_series(params, timeline);
  auto post = forward_backward(series, timeline.commit_at);
  return sample_coding_times(series, post, a, b, n, seed);
}

std::vector<std::vector<std::uint8_t>> sample_paths(const TransitionSeries& series,
                                                    const CodingPosterior& posterior, std::size_t n,
                                                    std::uint64_t seed) {
  const auto n_steps = static_cast<std::int64_t>(posterior.filtered.size());
  std::vector<std::vector<std::uint8_t>> paths(n, std::vector<std::uint8_t>(static_cast<std::size_t>(n_steps)));
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < n; ++k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    auto& path = paths[k];
    bool coding = uniform01(rng) < posterior.smoothed.back();
    path.back() = coding;
    for (std::int64_t t = n_steps - 2; t >= 0; --t) {
      const auto i = static_cast<std::size_t>(t);
      const double s = series.start[i + 1];
      const double e = series.end[i + 1];
      const double f = posterior.filtered[i];
      double w_code = f * (coding ? 1.0 - e : e);
      double w_idle = (1.0 - f) * (coding ? s : 1.0 - s);
      coding = uniform01(rng) * (w_code + w_idle) < w_code;
      path[i] = coding;
    }
  }
  return paths;
}

std::vector<IntervalEstimate> estimate_intervals(const DeveloperTimeline& timeline, const HmmParams& params,
                                                 std::size_t samples, std::uint64_t seed) {
  auto series = transition_series(params, timeline);
  auto post = forward_backward(series, timeline.commit_at);
  std::vector<IntervalEstimate> out;
  for (std::size_t i = 1; i < timeline.commit_minutes.size(); ++i) {
    IntervalEstimate est;
    est.commit_id = i < timeline.commit_ids.size() ? timeline.commit_ids[i] : std::to_string(i);
    est.start = timeline.commit_minutes[i - 1];
    est.end = timeline.commit_minutes[i];
    est.expected_hours = expected_coding_time(post, est.start, est.end);
    if (samples > 0) est.samples = sample_coding_times(series, post, est.start, est.end, samples, derive_seed(seed, i));
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace stdcoder::hmm
