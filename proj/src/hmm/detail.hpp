#pragma once

#include <cmath>
#include <random>

#include "stdcoder/common.hpp"
#include "stdcoder/hmm.hpp"

namespace stdcoder::hmm::detail {

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Evaluates the transition network at one minute. hidden_out, when given,
// receives the tanh activations; sig_out the two unclamped logistic values.
inline Transition eval_net(const HmmParams& p, const TimeFeatures& x, double* hidden_out = nullptr,
                           double* sig_out = nullptr) {
  const int h = p.hidden;
  double z0 = p.b2[0];
  double z1 = p.b2[1];
  for (int k = 0; k < h; ++k) {
    const double* w = &p.w1[static_cast<std::size_t>(k) * kTimeFeatures];
    double a = p.b1[static_cast<std::size_t>(k)] + w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3] * x[3] +
               w[4] * x[4];
    double hk = std::tanh(a);
    if (hidden_out) hidden_out[k] = hk;
    z0 += p.w2[static_cast<std::size_t>(k)] * hk;
    z1 += p.w2[static_cast<std::size_t>(h + k)] * hk;
  }
  double s0 = logistic(z0);
  double s1 = logistic(z1);
  if (sig_out) {
    sig_out[0] = s0;
    sig_out[1] = s1;
  }
  const double span = 1.0 - 2.0 * p.epsilon;
  return {p.epsilon + span * s0, p.epsilon + span * s1};
}

// Scaled forward-backward pass. Besides the posterior it produces the
// likelihood gradient with respect to S(t), E(t) and C when requested.
struct ForwardBackward {
  std::vector<double> filtered;  // normalized alpha for the coding state
  std::vector<double> beta0;     // scaled beta, coding
  std::vector<double> beta1;     // scaled beta, not coding
  std::vector<double> norm;      // per-step normalizers
  double log_likelihood = 0.0;
};

ForwardBackward run_forward(const TransitionSeries& series, std::span<const std::uint8_t> obs);
void run_backward(const TransitionSeries& series, std::span<const std::uint8_t> obs, ForwardBackward& fb);
std::vector<double> smoothed_of(const ForwardBackward& fb);

struct SeriesGradient {
  std::vector<double> d_start;  // d logL / d S(t)
  std::vector<double> d_end;    // d logL / d E(t)
  double d_commit_prob = 0.0;
};

SeriesGradient series_gradient(const TransitionSeries& series, std::span<const std::uint8_t> obs,
                               const ForwardBackward& fb);

// One backward-sampled path segment over (a, b]; returns coding minutes.
inline std::int64_t sample_segment(const TransitionSeries& series, const std::vector<double>& filtered,
                                   const std::vector<double>& smoothed, std::int64_t a, std::int64_t b,
                                   std::mt19937_64& rng) {
  if (b <= a) return 0;
  auto idx = [](std::int64_t t) { return static_cast<std::size_t>(t); };
  bool coding = uniform01(rng) < smoothed[idx(b)];
  std::int64_t count = coding ? 1 : 0;
  for (std::int64_t t = b - 1; t > a; --t) {
    const double s = series.start[idx(t + 1)];
    const double e = series.end[idx(t + 1)];
    const double f = filtered[idx(t)];
    // P(z_t | z_{t+1}, commits up to t) is proportional to filtered(z_t) * A_{t+1}(z_t, z_{t+1}).
    double w_code = f * (coding ? 1.0 - e : e);
    double w_idle = (1.0 - f) * (coding ? s : 1.0 - s);
    double total = w_code + w_idle;
    coding = total > 0 ? uniform01(rng) * total < w_code : false;
    count += coding ? 1 : 0;
  }
  return count;
}

}  // namespace stdcoder::hmm::detail
