#pragma once

#include "repshare/executor.hpp"
#include "repshare/model_graph.hpp"
#include "repshare/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace repshare {

struct ToyModel {
  ModelGraph graph;
  /// Keyed by graph.weight_path() (the manifest-relative path while in memory).
  std::map<std::string, Tensor> weights;

  WeightStore store() const { return WeightStore(weights); }
};

/// Two 7-stage CNNs on 3x32x32 inputs with 10-way dense outputs. They share
/// the conv/relu/maxpool prefix architecture; prefix weights are one base
/// draw perturbed independently per model. Model B carries a residual add
/// whose skip edge makes one cut invalid.
struct ToyPair {
  ToyModel a;
  ToyModel b;
  /// (n, 3, 32, 32) evaluation batch shared by both models.
  Tensor inputs;
};

inline constexpr std::size_t kDefaultBatch = 64;

/// Same seed and n give bit-identical pairs.
ToyPair gen_toy_pair(std::uint64_t seed, std::size_t n = kDefaultBatch);

/// Writes <dir>/<model>/manifest.json, <dir>/<model>/weights/*.npy for both
/// models and <dir>/inputs.npy. Output bytes depend only on the pair.
void write_toy_pair(const ToyPair& pair, const std::filesystem::path& dir);

}  // namespace repshare
