// Serial row-at-a-time gradient with plain loops; the baseline for tests and
// benchmarks of the blocked kernel.
#include "detail.hpp"

namespace stdcoder::mdn::reference {

BatchGradient nll_gradient(const MdnModel& model, std::span<const double> rows, std::span<const double> targets) {
  detail::check_shapes(model);
  const auto width = static_cast<std::size_t>(model.input_width);
  if (rows.size() != targets.size() * width) throw DataError("batch rows do not match targets");
  if (targets.empty()) throw DataError("empty batch");
  const auto offsets = detail::layer_offsets(model);
  const std::size_t n_layers = model.layers.size();
  const double scale = 1.0 / static_cast<double>(targets.size());
  BatchGradient out;
  out.gradient.assign(model.parameter_count(), 0.0);
  std::vector<std::vector<double>> acts(n_layers + 1);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    acts[0].assign(rows.begin() + static_cast<std::ptrdiff_t>(r * width),
                   rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto& layer = model.layers[l];
      auto& next = acts[l + 1];
      next.assign(layer.bias.begin(), layer.bias.end());
      for (int i = 0; i < layer.in; ++i) {
        const double a = acts[l][static_cast<std::size_t>(i)];
        const double* w = &layer.weight[static_cast<std::size_t>(i) * static_cast<std::size_t>(layer.out)];
        for (int o = 0; o < layer.out; ++o) next[static_cast<std::size_t>(o)] += a * w[o];
      }
      if (l + 1 < n_layers)
        for (auto& v : next) v = v > 0.0 ? v : 0.0;
    }
    std::vector<double> delta(static_cast<std::size_t>(3 * model.components));
    out.loss += detail::head_loss(acts[n_layers].data(), model.components, model.sigma_floor, targets[r],
                                  delta.data(), scale);
    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& layer = model.layers[l];
      double* gw = &out.gradient[offsets[l]];
      double* gb = gw + layer.weight.size();
      std::vector<double> back(static_cast<std::size_t>(layer.in), 0.0);
      for (int i = 0; i < layer.in; ++i) {
        const double a = acts[l][static_cast<std::size_t>(i)];
        const double* w = &layer.weight[static_cast<std::size_t>(i) * static_cast<std::size_t>(layer.out)];
        double acc = 0.0;
        for (int o = 0; o < layer.out; ++o) {
          gw[static_cast<std::size_t>(i) * static_cast<std::size_t>(layer.out) + static_cast<std::size_t>(o)] +=
              a * delta[static_cast<std::size_t>(o)];
          acc += w[o] * delta[static_cast<std::size_t>(o)];
        }
        back[static_cast<std::size_t>(i)] = a > 0.0 ? acc : 0.0;
      }
      for (int o = 0; o < layer.out; ++o) gb[o] += delta[static_cast<std::size_t>(o)];
      delta = std::move(back);
    }
  }
  out.loss *= scale;
  return out;
}

}  // namespace stdcoder::mdn::reference
