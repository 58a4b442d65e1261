#include "repshare/kernels.hpp"

#include "repshare/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <limits>

namespace repshare::kernels {

namespace {

using ConstRowMap = Eigen::Map<const RowMatrixXf>;
using RowMap = Eigen::Map<RowMatrixXf>;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

template <typename Reduce>
Tensor pool(const Tensor& x, const PoolParams& p, float init, Reduce reduce, bool average) {
  const auto [c, h, w] = x.feature_shape();
  const std::size_t n = x.dim(0);
  if (h < p.window || w < p.window) throw ShapeError("pool window larger than input");
  const std::size_t ho = (h - p.window) / p.stride + 1;
  const std::size_t wo = (w - p.window) / p.stride + 1;
  const float scale = 1.0f / static_cast<float>(p.window * p.window);
  Tensor out({n, c, ho, wo});
  auto src = x.data();
  auto dst = out.data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const float* in = src.data() + plane * h * w;
    for (std::size_t u = 0; u < ho; ++u) {
      for (std::size_t v = 0; v < wo; ++v) {
        float acc = init;
        for (std::size_t i = 0; i < p.window; ++i) {
          for (std::size_t j = 0; j < p.window; ++j) acc = reduce(acc, in[(u * p.stride + i) * w + v * p.stride + j]);
        }
        dst[o++] = average ? acc * scale : acc;
      }
    }
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, const ConvParams& p) {
  const auto [c, h, w] = x.feature_shape();
  if (c != p.c_in) throw ShapeError("conv2d input has " + std::to_string(c) + " channels, expected " + std::to_string(p.c_in));
  if (kernel.shape() != Shape{p.c_out, p.c_in, p.k_h, p.k_w}) throw ShapeError("conv2d kernel shape " + to_string(kernel.shape()));
  const std::size_t n = x.dim(0);
  const std::size_t ho = (h + 2 * p.pad - p.k_h) / p.stride + 1;
  const std::size_t wo = (w + 2 * p.pad - p.k_w) / p.stride + 1;
  const std::size_t patch = p.c_in * p.k_h * p.k_w;

  const ConstRowMap weights(kernel.data().data(), idx(p.c_out), idx(patch));
  RowMatrixXf cols(idx(patch), idx(ho * wo));
  Tensor out({n, p.c_out, ho, wo});
  for (std::size_t e = 0; e < n; ++e) {
    const float* img = x.data().data() + e * c * h * w;
    for (std::size_t ci = 0; ci < p.c_in; ++ci) {
      for (std::size_t ki = 0; ki < p.k_h; ++ki) {
        for (std::size_t kj = 0; kj < p.k_w; ++kj) {
          const auto row = idx((ci * p.k_h + ki) * p.k_w + kj);
          for (std::size_t u = 0; u < ho; ++u) {
            const auto yy = static_cast<std::ptrdiff_t>(u * p.stride + ki) - static_cast<std::ptrdiff_t>(p.pad);
            for (std::size_t v = 0; v < wo; ++v) {
              const auto xx = static_cast<std::ptrdiff_t>(v * p.stride + kj) - static_cast<std::ptrdiff_t>(p.pad);
              const bool inside = yy >= 0 && xx >= 0 && yy < static_cast<std::ptrdiff_t>(h) && xx < static_cast<std::ptrdiff_t>(w);
              cols(row, idx(u * wo + v)) = inside ? img[(ci * h + static_cast<std::size_t>(yy)) * w + static_cast<std::size_t>(xx)] : 0.0f;
            }
          }
        }
      }
    }
    RowMap y(out.data().data() + e * p.c_out * ho * wo, idx(p.c_out), idx(ho * wo));
    y.noalias() = weights * cols;
    if (bias) y.colwise() += Eigen::Map<const Eigen::VectorXf>(bias->data().data(), idx(p.c_out));
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

Tensor max_pool(const Tensor& x, const PoolParams& p) {
  return pool(x, p, -std::numeric_limits<float>::infinity(), [](float a, float b) { return std::max(a, b); }, false);
}

Tensor avg_pool(const Tensor& x, const PoolParams& p) {
  return pool(x, p, 0.0f, [](float a, float b) { return a + b; }, true);
}

Tensor global_avg_pool(const Tensor& x) {
  const auto [c, h, w] = x.feature_shape();
  const std::size_t n = x.dim(0);
  const float scale = 1.0f / static_cast<float>(h * w);
  Tensor out({n, c, 1, 1});
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < h * w; ++i) acc += x[plane * h * w + i];
    out[plane] = acc * scale;
  }
  return out;
}

Tensor dense(const Tensor& x, const Tensor& kernel, const Tensor* bias) {
  const std::size_t n = x.dim(0);
  const std::size_t in_dim = x.size() / n;
  if (kernel.rank() != 2 || kernel.dim(1) != in_dim) {
    throw ShapeError("dense kernel " + to_string(kernel.shape()) + " does not accept " + std::to_string(in_dim) + " features");
  }
  const std::size_t out_dim = kernel.dim(0);
  Tensor out({n, out_dim, 1, 1});
  const ConstRowMap weights(kernel.data().data(), idx(out_dim), idx(in_dim));
  RowMap y(out.data().data(), idx(n), idx(out_dim));
  y.noalias() = x.rows() * weights.transpose();
  if (bias) y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias->data().data(), idx(out_dim));
  return out;
}

Tensor add(std::span<const Tensor* const> xs) {
  Tensor out = *xs.front();
  for (std::size_t k = 1; k < xs.size(); ++k) {
    if (xs[k]->shape() != out.shape()) throw ShapeError("add operands differ in shape");
    auto src = xs[k]->data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

Tensor concat_channels(std::span<const Tensor* const> xs) {
  const std::size_t n = xs.front()->dim(0);
  const Shape3 first = xs.front()->feature_shape();
  std::size_t channels = 0;
  for (const Tensor* t : xs) {
    const Shape3 s = t->feature_shape();
    if (t->dim(0) != n || s.h != first.h || s.w != first.w) throw ShapeError("concat operands differ in batch or resolution");
    channels += s.c;
  }
  const std::size_t plane = first.h * first.w;
  Tensor out({n, channels, first.h, first.w});
  auto dst = out.data();
  std::size_t o = 0;
  for (std::size_t e = 0; e < n; ++e) {
    for (const Tensor* t : xs) {
      const std::size_t block = t->dim(1) * plane;
      auto src = t->data().subspan(e * block, block);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(o));
      o += block;
    }
  }
  return out;
}

}  // namespace repshare::kernels
