#pragma once

#include <utility>
#include <vector>

#include "stdcoder/hmm.hpp"

// Independent reference computations for the coding-time chain, written
// without the library's kernels.
namespace oracle {

// (S, E) by direct evaluation of the tanh network.
std::pair<double, double> transition(const stdcoder::hmm::HmmParams& p, const stdcoder::hmm::TimeFeatures& x);

// Clock features computed from the epoch minute with no library help.
stdcoder::hmm::TimeFeatures clock(std::int64_t epoch_minute, double normed_time);

struct PathSum {
  double log_likelihood;
  std::vector<double> smoothed;
};

// Sums over all 2^T hidden paths. T must be small.
PathSum enumerate_paths(const stdcoder::hmm::DeveloperTimeline& tl, const stdcoder::hmm::HmmParams& p);

stdcoder::hmm::HmmParams random_params(std::uint64_t seed, int hidden);
stdcoder::hmm::DeveloperTimeline random_timeline(std::uint64_t seed, std::int64_t length, double rate);

}  // namespace oracle
