#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdcoder/tokenizer.hpp"

// The standard coder: a ReLU multilayer perceptron whose last layer emits the
// parameters of a K-component Gaussian mixture over coding time in hours.
// Head layout per row: K mixture logits, K means, K raw scales with
// sigma = sigma_floor + exp(raw).
namespace stdcoder::mdn {

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;  // in x out, row-major
  std::vector<double> bias;    // out
};

struct MdnModel {
  int input_width = 0;
  std::vector<int> hidden;
  int components = 20;
  double sigma_floor = 1e-3;
  std::vector<DenseLayer> layers;  // hidden layers, then the 3K-wide head
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;  // divide after centering; never 0
  std::uint64_t dictionary_hash = 0;

  // He-uniform hidden layers; mean-head biases spread evenly over [0, 2] hours.
  static MdnModel create(int input_width, std::vector<int> hidden, int components, double sigma_floor,
                         std::uint64_t seed);
  // Same shapes as create() with every weight and bias zero.
  static MdnModel zeros(int input_width, std::vector<int> hidden, int components, double sigma_floor);

  std::size_t parameter_count() const;
  // Order: for each layer, weight then bias.
  std::vector<double> pack() const;
  void unpack(std::span<const double> flat);

  // Standardized copy of one input row.
  std::vector<double> standardize(std::span<const double> raw) const;
};

inline const std::vector<int> kDefaultHidden{256, 64, 64, 64, 64};

struct MixturePrediction {
  std::vector<double> pi;
  std::vector<double> mu;     // hours
  std::vector<double> sigma;  // hours

  std::size_t size() const { return pi.size(); }
  double mean() const;
  nlohmann::json to_json() const;
};

// Input row is the raw (transformed, unstandardized) feature vector.
MixturePrediction mdn_forward(const MdnModel& model, std::span<const double> features);
MixturePrediction mdn_forward(const MdnModel& model, const ChangeFeatures& features);
// Row-major batch, rows x input_width.
std::vector<MixturePrediction> mdn_forward_batch(const MdnModel& model, std::span<const double> rows);

double mdn_loss(const MixturePrediction& pred, double y);

// Mean NLL over rows of already standardized inputs and its gradient with
// respect to pack().
struct BatchGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

BatchGradient nll_gradient(const MdnModel& model, std::span<const double> standardized_rows,
                           std::span<const double> targets);

namespace reference {
BatchGradient nll_gradient(const MdnModel& model, std::span<const double> standardized_rows,
                           std::span<const double> targets);
}

struct MdnDataset {
  int width = 0;
  std::vector<double> rows;  // n x width, raw transformed features
  std::vector<double> targets;
  // Rows sharing a group (e.g. samples of one commit) land on the same side of
  // the holdout split. Empty means one group per row.
  std::vector<std::string> groups;

  std::size_t size() const { return targets.size(); }
  void add(std::span<const double> row, double y, std::string group = {});
};

struct MdnTrainConfig {
  std::vector<int> hidden = kDefaultHidden;
  int components = 20;
  double sigma_floor = 1e-3;
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  int epochs = 20;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static MdnTrainConfig from_json(const nlohmann::json& j);
};

struct MdnTrainResult {
  MdnModel model;
  std::vector<double> train_loss;    // mean minibatch NLL per epoch
  std::vector<double> holdout_loss;  // NaN when the holdout is empty
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> holdout_rows;
};

MdnTrainResult train_mdn(const MdnDataset& data, const MdnTrainConfig& config);

// Which rows fall in the holdout: a seeded hash of the group key. train_mdn
// uses split_seed(config.seed).
std::vector<bool> holdout_mask(const MdnDataset& data, double fraction, std::uint64_t seed);
bool in_holdout(const std::string& group, double fraction, std::uint64_t seed);
std::uint64_t split_seed(std::uint64_t config_seed);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Mean of the mixture truncated to [a, b]; a and b may be infinite.
double truncated_mixture_mean(const MixturePrediction& pred, double a, double b);

struct SchBounds {
  double lower = 0.0;
  double upper = 1.0;
};

double predict_sch(const MdnModel& model, std::span<const double> features, SchBounds bounds = {});
double predict_sch(const MdnModel& model, const ChangeFeatures& features, SchBounds bounds = {});
inline double sch_minutes(double hours) { return hours * 60.0; }

// One JSON header line followed by the parameters as little-endian float64.
void save_model(const MdnModel& model, const std::string& path, const nlohmann::json& extra = {});
MdnModel load_model(const std::string& path);
std::string serialize_model(const MdnModel& model, const nlohmann::json& extra = {});
MdnModel deserialize_model(const std::string& bytes);
nlohmann::json read_model_header(const std::string& path);

}  // namespace stdcoder::mdn
