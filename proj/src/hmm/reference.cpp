#include "detail.hpp"

namespace stdcoder::hmm::reference {

TransitionSeries transition_series(const HmmParams& params, const DeveloperTimeline& timeline) {
  TransitionSeries series;
  series.commit_prob = params.commit_prob();
  for (std::int64_t t = 0; t < timeline.length; ++t) {
    auto tr = detail::eval_net(params, time_features(t, timeline));
    series.start.push_back(tr.start);
    series.end.push_back(tr.end);
  }
  return series;
}

LikelihoodGradient log_likelihood_gradient(const DeveloperTimeline& timeline, const HmmParams& params) {
  const auto series = reference::transition_series(params, timeline);
  auto fb = detail::run_forward(series, timeline.commit_at);
  detail::run_backward(series, timeline.commit_at, fb);
  const auto sg = detail::series_gradient(series, timeline.commit_at, fb);

  const auto h = static_cast<std::size_t>(params.hidden);
  HmmParams grad = HmmParams::zeros(params.hidden, params.epsilon);
  const double span = 1.0 - 2.0 * params.epsilon;
  std::vector<double> hidden(h);
  double sig[2];
  for (std::int64_t t = 0; t < timeline.length; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const auto x = time_features(t, timeline);
    detail::eval_net(params, x, hidden.data(), sig);
    const double dz0 = sg.d_start[i] * span * sig[0] * (1.0 - sig[0]);
    const double dz1 = sg.d_end[i] * span * sig[1] * (1.0 - sig[1]);
    grad.b2[0] += dz0;
    grad.b2[1] += dz1;
    for (std::size_t k = 0; k < h; ++k) {
      grad.w2[k] += dz0 * hidden[k];
      grad.w2[h + k] += dz1 * hidden[k];
      const double da = (dz0 * params.w2[k] + dz1 * params.w2[h + k]) * (1.0 - hidden[k] * hidden[k]);
      grad.b1[k] += da;
      for (std::size_t j = 0; j < kTimeFeatures; ++j) grad.w1[k * kTimeFeatures + j] += da * x[j];
    }
  }
  const double sc = detail::logistic(params.commit_logit);
  grad.commit_logit = sg.d_commit_prob * span * sc * (1.0 - sc);
  return {fb.log_likelihood, grad.pack()};
}

std::vector<double> sample_coding_times(const TransitionSeries& series, const CodingPosterior& posterior,
                                        std::int64_t a, std::int64_t b, std::size_t n, std::uint64_t seed) {
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    out.push_back(
        static_cast<double>(detail::sample_segment(series, posterior.filtered, posterior.smoothed, a, b, rng)) / 60.0);
  }
  return out;
}

}  // namespace stdcoder::hmm::reference
