#include <limits>

#include "stdcoder/hmm.hpp"
#include "stdcoder/optim.hpp"

namespace stdcoder::hmm {

TrainResult train_hmm(const DeveloperTimeline& timeline, const TrainConfig& config) {
  if (timeline.commit_count() < config.min_commits)
    throw DataError("author " + timeline.author_id + " has " + std::to_string(timeline.commit_count()) +
                    " commits; training needs at least " + std::to_string(config.min_commits));

  HmmParams params = HmmParams::initial(config.hidden, config.epsilon, config.seed);
  std::vector<double> flat = params.pack();
  Adam adam(flat.size(), config.learning_rate);

  TrainResult result;
  result.params = params;
  double best = -std::numeric_limits<double>::infinity();
  double previous = -std::numeric_limits<double>::infinity();
  int stalled = 0;
  std::vector<double> ascent(flat.size());
  const auto features = feature_matrix(timeline);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    params.unpack(flat);
    auto lg = log_likelihood_gradient(timeline, params, features);
    result.log_likelihood_log.push_back(lg.log_likelihood);
    result.epochs = epoch + 1;
    if (lg.log_likelihood > best) {
      best = lg.log_likelihood;
      result.params = params;
    }
    stalled = lg.log_likelihood - previous < config.tolerance ? stalled + 1 : 0;
    previous = lg.log_likelihood;
    if (stalled >= config.patience) {
      result.early_stopped = true;
      break;
    }
    for (std::size_t i = 0; i < flat.size(); ++i) ascent[i] = -lg.gradient[i];
    adam.step(flat, ascent);
  }
  return result;
}

}  // namespace stdcoder::hmm
