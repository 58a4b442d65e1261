#pragma once

#include "repshare/tensor.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace repshare {

enum class SpatialMode { identity, nearest_resize };

std::string_view to_string(SpatialMode mode);

/// How a donor representation (C_s, H_s, W_s) is mapped onto a target stage's (C_t, H_t, W_t).
struct AdaptSpec {
  Shape3 src;
  Shape3 dst;
  /// dst.c source-channel indices, non-decreasing, each < src.c.
  std::vector<std::size_t> channel_map;
  SpatialMode spatial = SpatialMode::identity;

  friend bool operator==(const AdaptSpec&, const AdaptSpec&) = default;
};

/// channel_map[j] = floor(j * C_s / C_t): repeats channels when C_t > C_s,
/// subsamples uniformly when C_t < C_s. Spatial mode is identity iff the
/// resolutions agree. Throws ShapeError on a zero dimension.
AdaptSpec plan_adapt(const Shape3& src, const Shape3& dst);

/// Output channel j is source channel channel_map[j]; destination pixel (u, v)
/// reads source pixel (floor(u * H_s / H_t), floor(v * W_s / W_t)).
/// Throws ShapeError when rep's trailing shape differs from spec.src.
Tensor apply_adapt(const AdaptSpec& spec, const Tensor& rep);

}  // namespace repshare
