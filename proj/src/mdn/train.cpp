#include <cmath>
#include <random>

#include "detail.hpp"
#include "stdcoder/optim.hpp"

namespace stdcoder::mdn {

std::uint64_t split_seed(std::uint64_t config_seed) { return derive_seed(config_seed, "holdout"); }

bool in_holdout(const std::string& group, double fraction, std::uint64_t seed) {
  return static_cast<double>(derive_seed(seed, group) >> 11) * 0x1p-53 < fraction;
}

std::vector<bool> holdout_mask(const MdnDataset& data, double fraction, std::uint64_t seed) {
  std::vector<bool> mask(data.size(), false);
  if (fraction <= 0.0) return mask;
  const bool grouped = !data.groups.empty();
  for (std::size_t i = 0; i < data.size(); ++i)
    mask[i] = in_holdout(grouped ? data.groups[i] : std::to_string(i), fraction, seed);
  return mask;
}

namespace {

double mean_loss(const MdnModel& model, const MdnDataset& data, const std::vector<std::size_t>& idx) {
  const auto width = static_cast<std::size_t>(data.width);
  std::vector<double> rows;
  rows.reserve(idx.size() * width);
  for (auto i : idx)
    rows.insert(rows.end(), data.rows.begin() + static_cast<std::ptrdiff_t>(i * width),
                data.rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
  auto preds = mdn_forward_batch(model, rows);
  double sum = 0.0;
  for (std::size_t r = 0; r < idx.size(); ++r) sum += mdn_loss(preds[r], data.targets[idx[r]]);
  return sum / static_cast<double>(idx.size());
}

}  // namespace

MdnTrainResult train_mdn(const MdnDataset& data, const MdnTrainConfig& config) {
  if (data.size() == 0) throw DataError("MDN training set is empty");
  if (data.rows.size() != data.size() * static_cast<std::size_t>(data.width))
    throw DataError("MDN dataset rows do not match targets");
  if (!data.groups.empty() && data.groups.size() != data.size()) throw DataError("MDN dataset groups are incomplete");
  for (double y : data.targets)
    if (!std::isfinite(y) || y < 0.0) throw DataError("MDN targets must be finite and non-negative");
  if (config.batch_size == 0 || config.epochs < 0) throw DataError("invalid MDN training schedule");

  MdnTrainResult res;
  const auto mask = holdout_mask(data, config.holdout_fraction, split_seed(config.seed));
  for (std::size_t i = 0; i < data.size(); ++i) (mask[i] ? res.holdout_rows : res.train_rows).push_back(i);
  if (res.train_rows.empty()) throw DataError("holdout split left no training rows");

  const auto width = static_cast<std::size_t>(data.width);
  MdnModel model =
      MdnModel::create(data.width, config.hidden, config.components, config.sigma_floor, derive_seed(config.seed, "init"));
  // Standardization from the training rows only.
  for (std::size_t j = 0; j < width; ++j) {
    double mean = 0.0;
    for (auto i : res.train_rows) mean += data.rows[i * width + j];
    mean /= static_cast<double>(res.train_rows.size());
    double var = 0.0;
    for (auto i : res.train_rows) var += (data.rows[i * width + j] - mean) * (data.rows[i * width + j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(res.train_rows.size()));
    model.feature_mean[j] = mean;
    model.feature_scale[j] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<double> params = model.pack();
  Adam adam(params.size(), config.learning_rate);
  std::vector<std::size_t> order = res.train_rows;
  std::vector<double> batch_rows;
  std::vector<double> batch_targets;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, std::uint64_t(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_rows.resize((end - start) * width);
      batch_targets.resize(end - start);
      for (std::size_t r = start; r < end; ++r) {
        const std::size_t i = order[r];
        for (std::size_t j = 0; j < width; ++j)
          batch_rows[(r - start) * width + j] = (data.rows[i * width + j] - model.feature_mean[j]) / model.feature_scale[j];
        batch_targets[r - start] = data.targets[i];
      }
      auto g = nll_gradient(model, batch_rows, batch_targets);
      adam.step(params, g.gradient);
      model.unpack(params);
      epoch_loss += g.loss;
      ++batches;
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(batches));
    res.holdout_loss.push_back(res.holdout_rows.empty() ? std::nan("")
                                                        : mean_loss(model, data, res.holdout_rows));
  }
  res.model = std::move(model);
  return res;
}

}  // namespace stdcoder::mdn
