#include "repshare/shape_adapt.hpp"

#include "repshare/error.hpp"

namespace repshare {

std::string_view to_string(SpatialMode mode) {
  return mode == SpatialMode::identity ? "identity" : "nearest-resize";
}

AdaptSpec plan_adapt(const Shape3& src, const Shape3& dst) {
  if (src.volume() == 0 || dst.volume() == 0) {
    throw ShapeError("adapt shapes must be positive: " + to_string(src) + " -> " + to_string(dst));
  }
  AdaptSpec spec{src, dst, {}, SpatialMode::identity};
  spec.channel_map.resize(dst.c);
  for (std::size_t j = 0; j < dst.c; ++j) spec.channel_map[j] = j * src.c / dst.c;
  if (src.h != dst.h || src.w != dst.w) spec.spatial = SpatialMode::nearest_resize;
  return spec;
}

Tensor apply_adapt(const AdaptSpec& spec, const Tensor& rep) {
  const Tensor batch = as_representation(rep);
  if (batch.feature_shape() != spec.src) {
    throw ShapeError("donor representation has shape " + to_string(batch.feature_shape()) + ", adapt spec expects " +
                     to_string(spec.src));
  }
  const std::size_t n = batch.dim(0);
  const auto& [cs, hs, ws] = spec.src;
  const auto& [ct, ht, wt] = spec.dst;

  std::vector<std::size_t> row_map(ht), col_map(wt);
  for (std::size_t u = 0; u < ht; ++u) row_map[u] = u * hs / ht;
  for (std::size_t v = 0; v < wt; ++v) col_map[v] = v * ws / wt;

  Tensor out({n, ct, ht, wt});
  auto src = batch.data();
  auto dst = out.data();
  std::size_t o = 0;
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t j = 0; j < ct; ++j) {
      const float* plane = src.data() + (e * cs + spec.channel_map[j]) * hs * ws;
      for (std::size_t u = 0; u < ht; ++u) {
        const float* line = plane + row_map[u] * ws;
        for (std::size_t v = 0; v < wt; ++v) dst[o++] = line[col_map[v]];
      }
    }
  }
  return out;
}

}  // namespace repshare
