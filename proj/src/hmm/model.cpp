#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "detail.hpp"

namespace stdcoder::hmm {

using nlohmann::json;

DeveloperTimeline make_timeline(std::string author, std::int64_t window_start, std::int64_t length,
                                std::span<const std::int64_t> minutes) {
  if (length < 1) throw DataError("timeline length must be positive");
  DeveloperTimeline tl;
  tl.author_id = std::move(author);
  tl.window_start = window_start;
  tl.length = length;
  tl.commit_at.assign(static_cast<std::size_t>(length), 0);
  for (auto m : minutes) {
    if (m < 0 || m >= length) throw DataError("commit minute outside the timeline window");
    tl.commit_at[static_cast<std::size_t>(m)] = 1;
  }
  for (std::int64_t m = 0; m < length; ++m)
    if (tl.commit_at[static_cast<std::size_t>(m)]) tl.commit_minutes.push_back(m);
  return tl;
}

DeveloperTimeline timeline_from_commits(const std::string& author, std::span<const Commit> commits) {
  if (commits.empty()) throw DataError("author " + author + " has no commits");
  std::vector<const Commit*> sorted;
  for (const auto& c : commits) sorted.push_back(&c);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Commit* a, const Commit* b) { return a->author_time < b->author_time; });
  std::int64_t first = sorted.front()->author_time;
  std::int64_t start = first - ((first % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay;
  std::int64_t length = sorted.back()->author_time - start + 1;
  std::vector<std::int64_t> minutes;
  for (auto* c : sorted) minutes.push_back(c->author_time - start);
  DeveloperTimeline tl = make_timeline(author, start, length, minutes);
  std::int64_t last = -1;
  for (auto* c : sorted) {
    std::int64_t m = c->author_time - start;
    if (m == last)
      tl.commit_ids.back() = c->commit_id;
    else
      tl.commit_ids.push_back(c->commit_id);
    last = m;
  }
  return tl;
}

TimeFeatures clock_features(std::int64_t epoch_minute, double normed_time) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::int64_t of_day = ((epoch_minute % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay;
  std::int64_t of_week = weekday_of_minute(epoch_minute) * kMinutesPerDay + of_day;
  double day = two_pi * static_cast<double>(of_day) / static_cast<double>(kMinutesPerDay);
  double week = two_pi * static_cast<double>(of_week) / static_cast<double>(kMinutesPerWeek);
  return {std::sin(day), std::cos(day), std::sin(week), std::cos(week), normed_time};
}

TimeFeatures time_features(std::int64_t minute, const DeveloperTimeline& timeline) {
  if (minute < 0 || minute >= timeline.length) throw DataError("minute index outside the timeline");
  return clock_features(timeline.window_start + minute,
                        static_cast<double>(minute) / static_cast<double>(timeline.length));
}

HmmParams HmmParams::zeros(int hidden, double epsilon) {
  HmmParams p;
  p.hidden = hidden;
  p.epsilon = epsilon;
  auto h = static_cast<std::size_t>(hidden);
  p.w1.assign(h * kTimeFeatures, 0.0);
  p.b1.assign(h, 0.0);
  p.w2.assign(2 * h, 0.0);
  p.b2.assign(2, 0.0);
  return p;
}

HmmParams HmmParams::initial(int hidden, double epsilon, std::uint64_t seed) {
  HmmParams p = zeros(hidden, epsilon);
  std::mt19937_64 rng(seed);
  auto uni = [&](double r) { return (2.0 * uniform01(rng) - 1.0) * r; };
  for (auto& w : p.w1) w = uni(1.0);
  for (auto& b : p.b1) b = uni(1.0);
  for (auto& w : p.w2) w = uni(0.1);
  auto logit = [](double q) { return std::log(q / (1.0 - q)); };
  p.b2[0] = logit(0.02);
  p.b2[1] = logit(0.05);
  p.commit_logit = logit(0.05);
  return p;
}

std::size_t HmmParams::parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size() + 1; }

std::vector<double> HmmParams::pack() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto* v : {&w1, &b1, &w2, &b2}) flat.insert(flat.end(), v->begin(), v->end());
  flat.push_back(commit_logit);
  return flat;
}

void HmmParams::unpack(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DataError("parameter vector size mismatch");
  std::size_t i = 0;
  for (auto* v : {&w1, &b1, &w2, &b2})
    for (auto& x : *v) x = flat[i++];
  commit_logit = flat[i];
}

double clamp_logistic(double x, double epsilon) { return epsilon + (1.0 - 2.0 * epsilon) * detail::logistic(x); }

double HmmParams::commit_prob() const { return clamp_logistic(commit_logit, epsilon); }

json HmmParams::to_json() const {
  return {{"hidden", hidden}, {"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2},
          {"commit_logit", commit_logit}, {"epsilon", epsilon}};
}

HmmParams HmmParams::from_json(const json& j) {
  HmmParams p = zeros(j.at("hidden").get<int>(), j.at("epsilon").get<double>());
  p.w1 = j.at("w1").get<std::vector<double>>();
  p.b1 = j.at("b1").get<std::vector<double>>();
  p.w2 = j.at("w2").get<std::vector<double>>();
  p.b2 = j.at("b2").get<std::vector<double>>();
  p.commit_logit = j.at("commit_logit").get<double>();
  auto h = static_cast<std::size_t>(p.hidden);
  if (p.w1.size() != h * kTimeFeatures || p.b1.size() != h || p.w2.size() != 2 * h || p.b2.size() != 2)
    throw DataError("inconsistent HMM parameter shapes");
  return p;
}

Transition transition_probs(const HmmParams& params, const TimeFeatures& tf) { return detail::eval_net(params, tf); }

double emission_prob(State state, bool observed_commit, double commit_prob) {
  if (state == State::not_coding) return observed_commit ? 0.0 : 1.0;
  return observed_commit ? commit_prob : 1.0 - commit_prob;
}

json TrainConfig::to_json() const {
  return {{"hidden", hidden},       {"epsilon", epsilon},   {"learning_rate", learning_rate},
          {"max_epochs", max_epochs}, {"patience", patience}, {"tolerance", tolerance},
          {"min_commits", min_commits}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.min_commits = j.value("min_commits", c.min_commits);
  c.seed = j.value("seed", c.seed);
  return c;
}

json model_to_json(const HmmParams& params, const DeveloperTimeline& timeline, const TrainResult* result,
                   const TrainConfig* config) {
  json j = {{"author", timeline.author_id},
            {"params", params.to_json()},
            {"window", {{"start_utc_min", timeline.window_start}, {"length_min", timeline.length},
                        {"commits", timeline.commit_count()}}}};
  if (result)
    j["training"] = {{"epochs", result->epochs},
                     {"early_stopped", result->early_stopped},
                     {"log_likelihood", result->log_likelihood_log}};
  if (config) j["config"] = config->to_json();
  return j;
}

}  // namespace stdcoder::hmm
