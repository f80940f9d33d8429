// Minibatch NLL gradient. Rows are processed in fixed chunks in parallel and
// the per-chunk gradients are summed in chunk order, so the result does not
// depend on the number of threads.
#include "detail.hpp"

namespace stdcoder::mdn {

namespace {
constexpr std::int64_t kChunkRows = 128;
}

BatchGradient nll_gradient(const MdnModel& model, std::span<const double> rows, std::span<const double> targets) {
  using detail::ConstMatrixMap;
  using detail::MatrixMap;
  using detail::RowMatrix;
  detail::check_shapes(model);
  const auto width = static_cast<std::size_t>(model.input_width);
  if (rows.size() != targets.size() * width) throw DataError("batch rows do not match targets");
  const auto n = static_cast<std::int64_t>(targets.size());
  if (n == 0) throw DataError("empty batch");
  const std::size_t n_params = model.parameter_count();
  const auto offsets = detail::layer_offsets(model);
  const std::size_t n_layers = model.layers.size();
  const int k = model.components;
  const double scale = 1.0 / static_cast<double>(n);
  const std::int64_t n_chunks = (n + kChunkRows - 1) / kChunkRows;
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(n_chunks));
  std::vector<double> chunk_loss(static_cast<std::size_t>(n_chunks), 0.0);

#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const std::int64_t r0 = c * kChunkRows;
    const std::int64_t nr = std::min(n, r0 + kChunkRows) - r0;
    std::vector<RowMatrix> acts(n_layers + 1);
    acts[0] = ConstMatrixMap(rows.data() + static_cast<std::size_t>(r0) * width, nr, model.input_width);
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto& layer = model.layers[l];
      ConstMatrixMap w(layer.weight.data(), layer.in, layer.out);
      Eigen::Map<const Eigen::RowVectorXd> b(layer.bias.data(), layer.out);
      acts[l + 1].noalias() = acts[l] * w;
      acts[l + 1].rowwise() += b;
      if (l + 1 < n_layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
    }
    RowMatrix delta(nr, 3 * k);
    double loss = 0.0;
    for (std::int64_t r = 0; r < nr; ++r)
      loss += detail::head_loss(acts[n_layers].row(r).data(), k, model.sigma_floor,
                                targets[static_cast<std::size_t>(r0 + r)], delta.row(r).data(), scale);
    std::vector<double> g(n_params, 0.0);
    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& layer = model.layers[l];
      MatrixMap gw(g.data() + offsets[l], layer.in, layer.out);
      Eigen::Map<Eigen::RowVectorXd> gb(g.data() + offsets[l] + layer.weight.size(), layer.out);
      gw.noalias() = acts[l].transpose() * delta;
      gb = delta.colwise().sum();
      if (l == 0) break;
      ConstMatrixMap w(layer.weight.data(), layer.in, layer.out);
      RowMatrix back = delta * w.transpose();
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
    partial[static_cast<std::size_t>(c)] = std::move(g);
    chunk_loss[static_cast<std::size_t>(c)] = loss;
  }

  BatchGradient out;
  out.gradient.assign(n_params, 0.0);
  for (std::size_t c = 0; c < partial.size(); ++c) {
    out.loss += chunk_loss[c];
    for (std::size_t i = 0; i < n_params; ++i) out.gradient[i] += partial[c][i];
  }
  out.loss *= scale;
  return out;
}

}  // namespace stdcoder::mdn
