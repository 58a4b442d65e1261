#pragma once

// Batch kernels over (n, C, H, W) float tensors. Arithmetic order per example
// is fixed, so results are bit-reproducible.

#include "repshare/model_graph.hpp"
#include "repshare/tensor.hpp"

#include <span>

namespace repshare::kernels {

/// kernel: (C_out, C_in, K_h, K_w); bias: (C_out) or nullptr. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, const ConvParams& p);
Tensor relu(const Tensor& x);
Tensor max_pool(const Tensor& x, const PoolParams& p);
Tensor avg_pool(const Tensor& x, const PoolParams& p);
Tensor global_avg_pool(const Tensor& x);
/// Flattens each example; kernel (out_dim, in_dim); returns (n, out_dim, 1, 1).
Tensor dense(const Tensor& x, const Tensor& kernel, const Tensor* bias);
Tensor add(std::span<const Tensor* const> xs);
Tensor concat_channels(std::span<const Tensor* const> xs);

}  // namespace repshare::kernels
