#pragma once

#include "repshare/cka.hpp"
#include "repshare/executor.hpp"
#include "repshare/metrics.hpp"
#include "repshare/model_graph.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace repshare {

struct SweepRow {
  int donor_stage = 0;
  int target_stage = 0;
  double similarity = 0.0;
  double fidelity = 0.0;
  std::uint64_t savings_bytes = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// Heatmap over all stage pairs considered (diagonal only in same-stage mode).
  SimilarityMatrix similarity;
  /// Fidelity as Acc against S and the target stage's FLOPs, Size and Params.
  std::vector<CorrelationRow> metrics;
};

/// Shares each donor stage of `a` into each valid cut of `b` (same-stage:
/// i-th with i-th; cross-stage: every pair) and measures fidelity against
/// b's unmerged predictions on the shared batch. Rows are (s, t) ordered and
/// skip invalid cuts.
SweepResult run_sweep(const ModelGraph& a, WeightStore& weights_a, const ModelGraph& b, WeightStore& weights_b,
                      const Tensor& inputs, SimilarityMode mode);

std::string sweep_csv(std::span<const SweepRow> rows);

struct NoiseRow {
  double sigma = 0.0;
  double similarity = 0.0;
  double fidelity = 0.0;
};

/// Injects stage t's own dump plus Gaussian noise of standard deviation
/// sigma * std(dump) back into stage t. One noise draw (from `seed`) is
/// scaled by every sigma.
std::vector<NoiseRow> run_noise_sweep(const ModelGraph& g, WeightStore& weights, const Tensor& inputs, int target_stage,
                                      std::span<const double> sigmas, std::uint64_t seed);

inline constexpr int kDefaultNoiseStage = 2;

/// Default ten-point sigma grid.
std::vector<double> default_sigmas();

/// Noise sweep on model B of gen_toy_pair(seed, n).
std::vector<NoiseRow> run_noise_sweep(std::uint64_t seed, std::span<const double> sigmas,
                                      int target_stage = kDefaultNoiseStage, std::size_t n = 64);

std::string noise_csv(std::span<const NoiseRow> rows);

}  // namespace repshare
