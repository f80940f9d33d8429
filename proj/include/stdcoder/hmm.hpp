#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdcoder/corpus.hpp"

// Neural hidden Markov coding-time model.
//
// Each developer is a two-state chain on a one-minute grid. State 0 is coding,
// state 1 is not coding. A small tanh network maps five clock features of
// minute t to the start-coding probability S(t) and end-coding probability
// E(t) used for the transition into minute t:
//
//               coding    not coding
//   coding      1 - E(t)  E(t)
//   not coding  S(t)      1 - S(t)
//
// A commit can only be emitted while coding, with probability C per minute.
// The first minute draws its state from the stationary distribution of the
// t = 0 transition matrix, S(0) / (S(0) + E(0)).
namespace stdcoder::hmm {

enum class State { coding = 0, not_coding = 1 };

struct DeveloperTimeline {
  std::string author_id;
  std::int64_t window_start = 0;  // epoch minute of index 0
  std::int64_t length = 0;        // T
  std::vector<std::uint8_t> commit_at;
  std::vector<std::int64_t> commit_minutes;
  // Commit id per entry of commit_minutes; empty for simulated timelines.
  std::vector<std::string> commit_ids;

  std::size_t commit_count() const { return commit_minutes.size(); }
};

// Builds a timeline from window-relative commit minutes (any order, duplicates collapse).
DeveloperTimeline make_timeline(std::string author, std::int64_t window_start, std::int64_t length,
                                std::span<const std::int64_t> minutes);

// Window starts at UTC midnight of the first commit and ends at the last commit.
// Commits sharing a minute collapse; the later id is kept.
DeveloperTimeline timeline_from_commits(const std::string& author, std::span<const Commit> commits);

inline constexpr std::size_t kTimeFeatures = 5;
using TimeFeatures = std::array<double, kTimeFeatures>;

// sin/cos of the day dial, sin/cos of the week dial (Monday 00:00 origin), t / T.
TimeFeatures time_features(std::int64_t minute, const DeveloperTimeline& timeline);
TimeFeatures clock_features(std::int64_t epoch_minute, double normed_time);

struct HmmParams {
  int hidden = 16;
  std::vector<double> w1;  // hidden x 5, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // 2 x hidden; row 0 -> S, row 1 -> E
  std::vector<double> b2;  // 2
  double commit_logit = 0.0;
  double epsilon = 1e-4;

  static HmmParams zeros(int hidden, double epsilon = 1e-4);
  // Small random weights; output biases start at S = 0.02, E = 0.05, C = 0.05.
  static HmmParams initial(int hidden, double epsilon, std::uint64_t seed);

  std::size_t parameter_count() const;
  // Order: w1, b1, w2, b2, commit_logit.
  std::vector<double> pack() const;
  void unpack(std::span<const double> flat);

  double commit_prob() const;

  nlohmann::json to_json() const;
  static HmmParams from_json(const nlohmann::json& j);
};

double clamp_logistic(double x, double epsilon);

struct Transition {
  double start;  // S
  double end;    // E
};

Transition transition_probs(const HmmParams& params, const TimeFeatures& tf);

double emission_prob(State state, bool observed_commit, double commit_prob);

// S(t), E(t) for every minute of a timeline.
struct TransitionSeries {
  std::vector<double> start;
  std::vector<double> end;
  double commit_prob = 0.0;
};

TransitionSeries transition_series(const HmmParams& params, const DeveloperTimeline& timeline);

struct CodingPosterior {
  std::vector<double> smoothed;  // P(coding | all commits)
  std::vector<double> filtered;  // P(coding | commits up to t)
  double log_likelihood = 0.0;
};

CodingPosterior forward_backward(const DeveloperTimeline& timeline, const HmmParams& params);
CodingPosterior forward_backward(const TransitionSeries& series, std::span<const std::uint8_t> commit_at);

// Forward pass only.
std::vector<double> filtered_probs(const DeveloperTimeline& timeline, const HmmParams& params);

struct LikelihoodGradient {
  double log_likelihood = 0.0;
  std::vector<double> gradient;  // d logL / d pack()
};

LikelihoodGradient log_likelihood_gradient(const DeveloperTimeline& timeline, const HmmParams& params);

// Clock features of every minute, T x 5 row-major. Passing it to the gradient
// kernel avoids recomputing them on every training epoch.
std::vector<double> feature_matrix(const DeveloperTimeline& timeline);
LikelihoodGradient log_likelihood_gradient(const DeveloperTimeline& timeline, const HmmParams& params,
                                           std::span<const double> features);

struct TrainConfig {
  int hidden = 16;
  double epsilon = 1e-4;
  double learning_rate = 1e-2;
  int max_epochs = 800;
  int patience = 20;
  double tolerance = 1e-6;
  std::size_t min_commits = 50;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  HmmParams params;  // best epoch
  std::vector<double> log_likelihood_log;
  int epochs = 0;
  bool early_stopped = false;
};

TrainResult train_hmm(const DeveloperTimeline& timeline, const TrainConfig& config);

// Hours of expected coding over minutes (a, b].
double expected_coding_time(const CodingPosterior& posterior, std::int64_t a, std::int64_t b);

// Forward-filter backward-sample draws of coding hours over (a, b].
std::vector<double> sample_coding_times(const DeveloperTimeline& timeline, const HmmParams& params,
                                        std::int64_t a, std::int64_t b, std::size_t n, std::uint64_t seed);
std::vector<double> sample_coding_times(const TransitionSeries& series, const CodingPosterior& posterior,
                                        std::int64_t a, std::int64_t b, std::size_t n, std::uint64_t seed);

// Full posterior state paths (1 = coding).
std::vector<std::vector<std::uint8_t>> sample_paths(const TransitionSeries& series,
                                                    const CodingPosterior& posterior, std::size_t n,
                                                    std::uint64_t seed);

struct IntervalEstimate {
  std::string commit_id;
  std::int64_t start = 0;  // exclusive, window-relative
  std::int64_t end = 0;    // inclusive
  double expected_hours = 0.0;
  std::vector<double> samples;
};

// One estimate per commit after the first, over (previous commit, commit].
std::vector<IntervalEstimate> estimate_intervals(const DeveloperTimeline& timeline, const HmmParams& params,
                                                 std::size_t samples, std::uint64_t seed);

nlohmann::json model_to_json(const HmmParams& params, const DeveloperTimeline& timeline,
                             const TrainResult* result, const TrainConfig* config);

// Serial implementations kept as the test and benchmark baseline for the
// OpenMP kernels above.
namespace reference {
TransitionSeries transition_series(const HmmParams& params, const DeveloperTimeline& timeline);
LikelihoodGradient log_likelihood_gradient(const DeveloperTimeline& timeline, const HmmParams& params);
std::vector<double> sample_coding_times(const TransitionSeries& series, const CodingPosterior& posterior,
                                        std::int64_t a, std::int64_t b, std::size_t n, std::uint64_t seed);
}  // namespace reference

}  // namespace stdcoder::hmm
