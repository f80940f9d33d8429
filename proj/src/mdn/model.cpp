#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "detail.hpp"

namespace stdcoder::mdn {

using nlohmann::json;

namespace detail {

double head_loss(const double* head, int k, double sigma_floor, double y, double* dhead, double scale) {
  const double* logits = head;
  const double* mu = head + k;
  const double* raw = head + 2 * k;
  double lmax = *std::max_element(logits, logits + k);
  double lsum = 0.0;
  for (int i = 0; i < k; ++i) lsum += std::exp(logits[i] - lmax);
  const double lse = lmax + std::log(lsum);

  // log(pi_k N(y; mu_k, sigma_k))
  std::vector<double> lc(static_cast<std::size_t>(k));
  double cmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    const double sigma = sigma_floor + std::exp(raw[i]);
    const double z = (y - mu[i]) / sigma;
    lc[i] = logits[i] - lse - std::log(sigma) - kHalfLogTwoPi - 0.5 * z * z;
    cmax = std::max(cmax, lc[i]);
  }
  double csum = 0.0;
  for (int i = 0; i < k; ++i) csum += std::exp(lc[i] - cmax);
  const double nll = -(cmax + std::log(csum));
  if (dhead) {
    for (int i = 0; i < k; ++i) {
      const double sigma = sigma_floor + std::exp(raw[i]);
      const double z = (y - mu[i]) / sigma;
      const double resp = std::exp(lc[i] - cmax) / csum;
      const double weight = std::exp(logits[i] - lse);
      dhead[i] = scale * (weight - resp);
      dhead[k + i] = scale * (-resp * z / sigma);
      dhead[2 * k + i] = scale * (-resp * (z * z - 1.0) / sigma) * (sigma - sigma_floor);
    }
  }
  return nll;
}

MixturePrediction head_to_mixture(const double* head, int k, double sigma_floor) {
  MixturePrediction p;
  p.pi.resize(static_cast<std::size_t>(k));
  p.mu.assign(head + k, head + 2 * k);
  p.sigma.resize(static_cast<std::size_t>(k));
  double lmax = *std::max_element(head, head + k);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += (p.pi[i] = std::exp(head[i] - lmax));
  for (auto& w : p.pi) w /= sum;
  for (int i = 0; i < k; ++i) p.sigma[i] = sigma_floor + std::exp(head[2 * k + i]);
  return p;
}

void check_shapes(const MdnModel& model) {
  if (model.layers.size() != model.hidden.size() + 1) throw DataError("MDN layer count does not match architecture");
  int in = model.input_width;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const int out = l < model.hidden.size() ? model.hidden[l] : 3 * model.components;
    if (layer.in != in || layer.out != out ||
        layer.weight.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(out) ||
        layer.bias.size() != static_cast<std::size_t>(out))
      throw DataError("MDN layer shapes are inconsistent");
    in = out;
  }
  if (model.feature_mean.size() != static_cast<std::size_t>(model.input_width) ||
      model.feature_scale.size() != static_cast<std::size_t>(model.input_width))
    throw DataError("MDN standardization statistics do not match input width");
}

std::vector<std::size_t> layer_offsets(const MdnModel& model) {
  std::vector<std::size_t> off;
  std::size_t at = 0;
  for (const auto& layer : model.layers) {
    off.push_back(at);
    at += layer.weight.size() + layer.bias.size();
  }
  return off;
}

}  // namespace detail

MdnModel MdnModel::zeros(int input_width, std::vector<int> hidden, int components, double sigma_floor) {
  if (input_width < 1 || components < 1) throw DataError("MDN needs positive input width and component count");
  if (!(sigma_floor > 0)) throw DataError("sigma floor must be positive");
  for (int h : hidden)
    if (h < 1) throw DataError("hidden layer sizes must be positive");
  MdnModel m;
  m.input_width = input_width;
  m.hidden = std::move(hidden);
  m.components = components;
  m.sigma_floor = sigma_floor;
  int in = input_width;
  for (std::size_t l = 0; l <= m.hidden.size(); ++l) {
    DenseLayer layer;
    layer.in = in;
    layer.out = l < m.hidden.size() ? m.hidden[l] : 3 * components;
    layer.weight.assign(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out), 0.0);
    layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
    in = layer.out;
    m.layers.push_back(std::move(layer));
  }
  m.feature_mean.assign(static_cast<std::size_t>(input_width), 0.0);
  m.feature_scale.assign(static_cast<std::size_t>(input_width), 1.0);
  return m;
}

MdnModel MdnModel::create(int input_width, std::vector<int> hidden, int components, double sigma_floor,
                          std::uint64_t seed) {
  MdnModel m = zeros(input_width, std::move(hidden), components, sigma_floor);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const bool head = l + 1 == m.layers.size();
    const double limit = std::sqrt(6.0 / layer.in) * (head ? 0.1 : 1.0);
    for (auto& w : layer.weight) w = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  auto& head = m.layers.back().bias;
  const int k = components;
  for (int i = 0; i < k; ++i) {
    head[static_cast<std::size_t>(k + i)] = k == 1 ? 1.0 : 2.0 * i / (k - 1);
    head[static_cast<std::size_t>(2 * k + i)] = std::log(0.25);
  }
  return m;
}

std::size_t MdnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<double> MdnModel::pack() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.begin(), l.weight.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void MdnModel::unpack(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DataError("MDN parameter vector size mismatch");
  auto it = flat.begin();
  for (auto& l : layers) {
    std::copy_n(it, l.weight.size(), l.weight.begin());
    it += static_cast<std::ptrdiff_t>(l.weight.size());
    std::copy_n(it, l.bias.size(), l.bias.begin());
    it += static_cast<std::ptrdiff_t>(l.bias.size());
  }
}

std::vector<double> MdnModel::standardize(std::span<const double> raw) const {
  if (raw.size() != static_cast<std::size_t>(input_width))
    throw DataError("feature width " + std::to_string(raw.size()) + " does not match model input width " +
                    std::to_string(input_width));
  std::vector<double> x(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) x[j] = (raw[j] - feature_mean[j]) / feature_scale[j];
  return x;
}

double MixturePrediction::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < size(); ++k) m += pi[k] * mu[k];
  return m;
}

json MixturePrediction::to_json() const { return {{"pi", pi}, {"mu", mu}, {"sigma", sigma}}; }

std::vector<MixturePrediction> mdn_forward_batch(const MdnModel& model, std::span<const double> rows) {
  using detail::ConstMatrixMap;
  using detail::RowMatrix;
  detail::check_shapes(model);
  const auto width = static_cast<std::size_t>(model.input_width);
  if (rows.size() % width != 0) throw DataError("feature rows do not match model input width");
  const auto n = static_cast<std::int64_t>(rows.size() / width);
  std::vector<MixturePrediction> out(static_cast<std::size_t>(n));
  constexpr std::int64_t kRows = 256;
  const std::int64_t n_chunks = (n + kRows - 1) / kRows;
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const std::int64_t r0 = c * kRows;
    const std::int64_t nr = std::min(n, r0 + kRows) - r0;
    RowMatrix a(nr, model.input_width);
    for (std::int64_t r = 0; r < nr; ++r)
      for (int j = 0; j < model.input_width; ++j)
        a(r, j) = (rows[static_cast<std::size_t>(r0 + r) * width + static_cast<std::size_t>(j)] -
                   model.feature_mean[static_cast<std::size_t>(j)]) /
                  model.feature_scale[static_cast<std::size_t>(j)];
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const auto& layer = model.layers[l];
      ConstMatrixMap w(layer.weight.data(), layer.in, layer.out);
      Eigen::Map<const Eigen::RowVectorXd> b(layer.bias.data(), layer.out);
      RowMatrix z = a * w;
      z.rowwise() += b;
      if (l + 1 < model.layers.size()) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    for (std::int64_t r = 0; r < nr; ++r)
      out[static_cast<std::size_t>(r0 + r)] = detail::head_to_mixture(a.row(r).data(), model.components,
                                                                      model.sigma_floor);
  }
  return out;
}

MixturePrediction mdn_forward(const MdnModel& model, std::span<const double> features) {
  if (features.size() != static_cast<std::size_t>(model.input_width))
    throw DataError("feature width " + std::to_string(features.size()) + " does not match model input width " +
                    std::to_string(model.input_width));
  return mdn_forward_batch(model, features).front();
}

MixturePrediction mdn_forward(const MdnModel& model, const ChangeFeatures& features) {
  return mdn_forward(model, features.transformed());
}

double mdn_loss(const MixturePrediction& pred, double y) {
  double cmax = -std::numeric_limits<double>::infinity();
  std::vector<double> lc(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double z = (y - pred.mu[k]) / pred.sigma[k];
    lc[k] = std::log(pred.pi[k]) - std::log(pred.sigma[k]) - detail::kHalfLogTwoPi - 0.5 * z * z;
    cmax = std::max(cmax, lc[k]);
  }
  if (!std::isfinite(cmax)) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double v : lc) s += std::exp(v - cmax);
  return -(cmax + std::log(s));
}

namespace {

constexpr double kSqrtHalfPi = 1.25331413731550025121;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// exp(x^2) erfc(x) for x >= 0.
double erfcx(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series; the first omitted term is below 1e-10 relative at x = 25.
  const double inv = 1.0 / (x * x);
  return (1.0 - 0.5 * inv * (1.0 - 1.5 * inv * (1.0 - 2.5 * inv))) / (x * std::sqrt(std::numbers::pi));
}

// Upper-tail Mills ratio Q(x) / phi(x) for x >= 0.
double mills(double x) { return kSqrtHalfPi * erfcx(x * kInvSqrt2); }

double log_phi(double x) { return -detail::kHalfLogTwoPi - 0.5 * x * x; }

struct Piece {
  double log_mass;  // log of P(lo <= Z <= hi) for standard normal Z
  double mean;      // E[Z | lo <= Z <= hi]
};

// Standard normal restricted to [lo, hi] with 0 <= lo < hi, computed relative
// to phi(lo) so deep tails neither underflow nor cancel.
Piece upper_piece(double lo, double hi) {
  const double ratio = std::isinf(hi) ? 0.0 : std::exp(-0.5 * (hi - lo) * (hi + lo));
  const double tail_hi = std::isinf(hi) ? 0.0 : ratio * mills(hi);
  const double rel_mass = mills(lo) - tail_hi;
  return {log_phi(lo) + std::log(rel_mass), (1.0 - ratio) / rel_mass};
}

Piece standard_piece(double lo, double hi) {
  if (lo >= 0.0) return upper_piece(lo, hi);
  if (hi <= 0.0) {
    Piece p = upper_piece(-hi, -lo);
    p.mean = -p.mean;
    return p;
  }
  const double mass = 0.5 * (std::erf(hi * kInvSqrt2) - std::erf(lo * kInvSqrt2));
  const double dens = (std::isinf(lo) ? 0.0 : std::exp(log_phi(lo))) - (std::isinf(hi) ? 0.0 : std::exp(log_phi(hi)));
  return {std::log(mass), dens / mass};
}

}  // namespace

double truncated_mixture_mean(const MixturePrediction& pred, double a, double b) {
  if (!(a < b)) throw DataError("truncation bounds must satisfy a < b");
  const std::size_t k = pred.size();
  std::vector<double> logw(k);
  std::vector<double> means(k);
  double wmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const double s = pred.sigma[i];
    Piece p = standard_piece((a - pred.mu[i]) / s, (b - pred.mu[i]) / s);
    logw[i] = pred.pi[i] > 0 ? std::log(pred.pi[i]) + p.log_mass : -std::numeric_limits<double>::infinity();
    means[i] = std::clamp(pred.mu[i] + s * p.mean, a, b);
    if (std::isnan(logw[i])) logw[i] = -std::numeric_limits<double>::infinity();
    wmax = std::max(wmax, logw[i]);
  }
  if (!(wmax > -std::numeric_limits<double>::infinity())) throw DataError("mixture has no mass inside the bounds");
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (logw[i] == -std::numeric_limits<double>::infinity()) continue;
    const double w = std::exp(logw[i] - wmax);
    total += w;
    acc += w * means[i];
  }
  if (wmax + std::log(total) < std::log(1e-300)) throw DataError("mixture mass inside the bounds is below 1e-300");
  return std::clamp(acc / total, a, b);
}

double predict_sch(const MdnModel& model, std::span<const double> features, SchBounds bounds) {
  return truncated_mixture_mean(mdn_forward(model, features), bounds.lower, bounds.upper);
}

double predict_sch(const MdnModel& model, const ChangeFeatures& features, SchBounds bounds) {
  return predict_sch(model, features.transformed(), bounds);
}

void MdnDataset::add(std::span<const double> row, double y, std::string group) {
  if (width == 0) width = static_cast<int>(row.size());
  if (row.size() != static_cast<std::size_t>(width)) throw DataError("dataset rows must share one width");
  rows.insert(rows.end(), row.begin(), row.end());
  targets.push_back(y);
  if (!group.empty() || !groups.empty()) {
    groups.resize(targets.size() - 1);
    groups.push_back(std::move(group));
  }
}

json MdnTrainConfig::to_json() const {
  return {{"hidden", hidden},       {"components", components},  {"sigma_floor", sigma_floor},
          {"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs},
          {"holdout_fraction", holdout_fraction}, {"seed", seed}};
}

MdnTrainConfig MdnTrainConfig::from_json(const json& j) {
  MdnTrainConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.components = j.value("components", c.components);
  c.sigma_floor = j.value("sigma_floor", c.sigma_floor);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {
constexpr const char* kFormat = "stdcoder-mdn";

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}
}  // namespace

std::string serialize_model(const MdnModel& model, const json& extra) {
  detail::check_shapes(model);
  json header = {{"format", kFormat},
                 {"version", 1},
                 {"input_width", model.input_width},
                 {"hidden", model.hidden},
                 {"components", model.components},
                 {"sigma_floor", model.sigma_floor},
                 {"activation", "relu"},
                 {"feature_mean", model.feature_mean},
                 {"feature_scale", model.feature_scale},
                 {"dictionary_hash", hex64(model.dictionary_hash)},
                 {"parameter_count", model.parameter_count()},
                 {"encoding", "float64-le"}};
  if (extra.is_object())
    for (const auto& [key, value] : extra.items()) header[key] = value;
  std::string out = header.dump();
  out.push_back('\n');
  for (double v : model.pack()) put_le(out, v);
  return out;
}

namespace {
json parse_header(const std::string& bytes, std::size_t& nl) {
  nl = bytes.find('\n');
  if (nl == std::string::npos) throw DataError("MDN model file has no header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw DataError(std::string("MDN model header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kFormat) throw DataError("not an MDN model file");
  return header;
}
}  // namespace

json read_model_header(const std::string& path) {
  std::size_t nl = 0;
  try {
    return parse_header(read_file(path), nl);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

MdnModel deserialize_model(const std::string& bytes) {
  std::size_t nl = 0;
  json header = parse_header(bytes, nl);
  MdnModel m = MdnModel::zeros(header.at("input_width").get<int>(), header.at("hidden").get<std::vector<int>>(),
                               header.at("components").get<int>(), header.at("sigma_floor").get<double>());
  m.feature_mean = header.at("feature_mean").get<std::vector<double>>();
  m.feature_scale = header.at("feature_scale").get<std::vector<double>>();
  m.dictionary_hash = std::stoull(header.at("dictionary_hash").get<std::string>(), nullptr, 16);
  const std::size_t n = m.parameter_count();
  if (header.at("parameter_count").get<std::size_t>() != n || bytes.size() - nl - 1 != 8 * n)
    throw DataError("MDN model parameter block has the wrong size");
  std::vector<double> flat(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (std::size_t i = 0; i < n; ++i) flat[i] = get_le(p + 8 * i);
  m.unpack(flat);
  detail::check_shapes(m);
  return m;
}

void save_model(const MdnModel& model, const std::string& path, const json& extra) {
  write_file_atomic(path, serialize_model(model, extra));
}

MdnModel load_model(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    return deserialize_model(bytes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace stdcoder::mdn
