#pragma once

#include "repshare/error.hpp"
#include "repshare/model_graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace repshare {

/// Conventional per-stage cost figures. A multiply-accumulate counts as two
/// FLOPs; biases are included in parameter counts.
struct StageMetrics {
  int stage_id = 0;
  std::uint64_t flops = 0;
  std::uint64_t rep_size_bytes = 0;  // C * H * W * 4
  std::uint64_t param_count = 0;
  std::uint64_t param_bytes = 0;     // param_count * 4
};

std::vector<StageMetrics> stage_metrics(const ModelGraph& g);

/// Parameter bytes of stages 0..t inclusive, i.e. what is not loaded when the
/// target's prefix up to t is replaced by a shared representation.
std::uint64_t memory_savings(const ModelGraph& g, int target_stage);

/// Pearson correlation of two equal-length samples. UndefinedCorrelation when
/// fewer than two points or either sample has zero variance.
template <typename DerivedX, typename DerivedY>
double pearson(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) throw UndefinedCorrelation("samples differ in length");
  if (x.size() < 2) throw UndefinedCorrelation("need at least two points");
  const Eigen::ArrayXd dx = x.template cast<double>().array() - x.template cast<double>().mean();
  const Eigen::ArrayXd dy = y.template cast<double>().array() - y.template cast<double>().mean();
  const double sxx = (dx * dx).sum();
  const double syy = (dy * dy).sum();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelation("zero variance");
  const double r = (dx * dy).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double pearson(std::span<const double> x, std::span<const double> y);

/// Piecewise similarity -> accuracy model: a constant floor below the
/// threshold, a line at and above it. The defaults (threshold 0.4, floor
/// 0.031) are starting values; re-fit them for a given model pair.
struct AccuracyEstimator {
  double threshold = 0.4;
  double floor_value = 0.031;
  double slope = 1.0;
  double intercept = 0.0;

  double estimate(double similarity) const {
    return similarity < threshold ? floor_value : slope * similarity + intercept;
  }
};

inline constexpr double kDefaultThreshold = 0.4;
inline constexpr double kDefaultFloor = 0.031;

/// Grid-searches the threshold over the observed similarities plus 0.4. For
/// each candidate the floor is the mean accuracy below it (0.031 when none)
/// and the line is the least-squares fit at or above it; the candidate with
/// the smallest total squared error wins, ties going to the smaller
/// threshold. FitError with fewer than four pairs, similarities outside
/// [0, 1], or no candidate leaving two distinct points for the line.
AccuracyEstimator fit_estimator(std::span<const std::pair<double, double>> pairs);

std::string estimator_to_json(const AccuracyEstimator& est);
AccuracyEstimator estimator_from_json(std::string_view text);

struct CorrelationRow {
  double acc = 0.0;
  double similarity = 0.0;
  double flops = 0.0;
  double size = 0.0;
  double params = 0.0;
};

/// |r| of accuracy against one metric column; nullopt when undefined.
struct MetricCorrelation {
  std::string metric;
  std::optional<double> abs_r;
};

/// Correlates Acc with S, FLOPs, Size and Params; ranked by |r| descending,
/// undefined columns last. UndefinedCorrelation with fewer than two rows.
std::vector<MetricCorrelation> correlate_table(std::span<const CorrelationRow> rows);

/// Reads the Acc,S,FLOPs,Size,Params CSV (column order free, extra columns ignored).
std::vector<CorrelationRow> parse_correlation_csv(std::string_view text);
std::string correlation_csv(std::span<const CorrelationRow> rows);
/// {"metric": |r| or null, ...} in ranked order.
std::string correlation_report_json(std::span<const MetricCorrelation> report);

}  // namespace repshare
