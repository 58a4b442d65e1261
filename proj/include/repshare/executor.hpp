#pragma once

#include "repshare/model_graph.hpp"
#include "repshare/shape_adapt.hpp"
#include "repshare/tensor.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace repshare {

/// Serves stage parameters by resolved path and records every path fetched,
/// which is how prefix isolation of a merged run is observed.
class WeightStore {
 public:
  /// Reads NPY files from disk on first use.
  WeightStore() = default;
  /// Serves only from memory; keys are ModelGraph::weight_path() strings.
  explicit WeightStore(std::map<std::string, Tensor> preloaded);

  const Tensor& fetch(const std::filesystem::path& path);
  const std::set<std::string>& touched() const { return touched_; }

 private:
  std::map<std::string, Tensor> cache_;
  std::set<std::string> touched_;
  bool memory_only_ = false;
};

struct ForwardResult {
  /// (n, classes) output of the graph's output stage.
  Tensor predictions;
  /// Every stage's (n, C, H, W) output.
  RepresentationSet dumps;
};

/// Executes all stages in id order on an (n, C, H, W) batch matching g.input_shape.
ForwardResult forward(const ModelGraph& g, WeightStore& weights, const Tensor& inputs);

/// Donor representation injected as the output of target_stage.
struct InjectionPoint {
  int target_stage = 0;
  Tensor donor_rep;
  AdaptSpec adapt;
};

/// Plans the adapter from the donor's (C, H, W) to the target stage's out_shape.
InjectionPoint make_injection(const ModelGraph& g, int target_stage, Tensor donor_rep);

/// Runs only the stages after target_stage. Slots of earlier stages are
/// placeholders, and their weights are never fetched. Reading a placeholder
/// (or the model input) throws CutViolation; an adapter whose destination does
/// not match the target's out_shape throws ShapeError.
Tensor forward_merged(const ModelGraph& g, WeightStore& weights, const InjectionPoint& inj);

/// Fraction of rows whose argmax agrees (ties resolve to the lowest class index).
double fidelity(const Tensor& merged, const Tensor& original);

/// Row-wise argmax, lowest index on ties.
std::vector<std::size_t> argmax_rows(const Tensor& predictions);

/// Stage dumps on disk: <dir>/<model>/<stage_id>.npy plus <dir>/<model>/dumps.json
/// {"model", "n", "stages": {id: path}} with paths relative to dumps.json.
struct DumpSet {
  std::string model;
  RepresentationSet reps;
};

/// Returns the path of the written dumps.json.
std::filesystem::path write_dumps(const DumpSet& dumps, const std::filesystem::path& out_dir);

/// Accepts the dumps.json file itself or the directory holding it.
DumpSet read_dumps(const std::filesystem::path& path);

}  // namespace repshare
