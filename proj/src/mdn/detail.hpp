#pragma once

#include <Eigen/Core>

#include "stdcoder/mdn.hpp"

namespace stdcoder::mdn::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;

// NLL of one row's head outputs (3K values). When dhead is non-null it
// receives dNLL/dhead scaled by `scale`.
double head_loss(const double* head, int k, double sigma_floor, double y, double* dhead, double scale);

MixturePrediction head_to_mixture(const double* head, int k, double sigma_floor);

void check_shapes(const MdnModel& model);

// Offsets of each layer's weight block in pack() order; bias follows weight.
std::vector<std::size_t> layer_offsets(const MdnModel& model);

}  // namespace stdcoder::mdn::detail
