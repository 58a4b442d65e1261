#pragma once

#include "repshare/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace repshare {

enum class StageKind { conv2d, relu, maxpool2d, avgpool2d, global_avg_pool, dense, add, concat_channels, opaque };

std::string_view to_string(StageKind kind);
StageKind parse_stage_kind(std::string_view text);

struct ConvParams {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t k_h = 0;
  std::size_t k_w = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct DenseParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

struct PoolParams {
  std::size_t window = 1;
  std::size_t stride = 1;
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

/// Stage imported from an external framework: only its footprint is known, it cannot be executed.
struct OpaqueParams {
  std::size_t params_count = 0;
  friend bool operator==(const OpaqueParams&, const OpaqueParams&) = default;
};

using StageParams = std::variant<std::monostate, ConvParams, DenseParams, PoolParams, OpaqueParams>;

/// Producer id used in edge lists for the model input.
inline constexpr int kModelInput = -1;

struct StageSpec {
  int id = 0;
  std::string name;
  StageKind kind = StageKind::relu;
  StageParams params;
  /// Producer stage ids, all lower than id. Empty means the stage reads the model input.
  std::vector<int> inputs;
  Shape3 out_shape;
  /// Role ("kernel", "bias") -> NPY path relative to the manifest directory.
  std::map<std::string, std::string> weights;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct ModelGraph {
  std::string name;
  Shape3 input_shape;
  std::vector<StageSpec> stages;
  int output_stage = 0;
  /// Directory weight paths are resolved against (the manifest's directory).
  std::filesystem::path base_dir;

  std::size_t size() const { return stages.size(); }
  /// GraphError for an unknown id.
  const StageSpec& stage(int id) const;
  std::filesystem::path weight_path(const StageSpec& s, const std::string& role) const;
};

/// Expected NPY shape of a stage parameter: conv kernel (C_out, C_in, K_h, K_w),
/// dense kernel (out_dim, in_dim), biases (C_out) / (out_dim).
Shape expected_weight_shape(const StageSpec& s, const std::string& role);

/// Recomputes every stage's output shape from its kind, params and producers,
/// and checks it against the declared out_shape. Also checks topological order,
/// arity, and the output stage. Throws GraphError naming the stage.
std::vector<Shape3> infer_shapes(const ModelGraph& g);

/// Parses manifest JSON and runs infer_shapes. Weight files are not touched.
ModelGraph parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

/// parse_manifest plus existence and shape checks of every referenced weight file.
ModelGraph load_manifest(const std::filesystem::path& path);

std::string manifest_to_json(const ModelGraph& g);
void save_manifest(const ModelGraph& g, const std::filesystem::path& path);

/// Result of a cut check: the stages <= target form the offloaded prefix, and
/// the cut is executable when no later stage reads anything but the target's
/// own output from that prefix.
struct CutCheck {
  bool valid = true;
  /// (producer, consumer) edges crossing the cut; producer kModelInput for the model input.
  std::vector<std::pair<int, int>> crossing_edges;

  std::string diagnostic() const;
};

CutCheck valid_cut(const ModelGraph& g, int target_stage);

}  // namespace repshare
