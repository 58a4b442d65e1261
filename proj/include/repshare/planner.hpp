#pragma once

#include "repshare/cka.hpp"
#include "repshare/metrics.hpp"
#include "repshare/model_graph.hpp"
#include "repshare/shape_adapt.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace repshare {

/// One candidate share: the donor's stage-s output replaces the target's prefix up to stage t.
struct MergePlan {
  std::string donor_model;
  int donor_stage = 0;
  std::string target_model;
  int target_stage = 0;
  double similarity = 0.0;
  AdaptSpec adapt;
  std::uint64_t savings_bytes = 0;
  double estimated_accuracy = 0.0;
  bool valid = false;
  std::string diagnostic;
};

/// One plan per (donor stage, target stage), donor-major. Invalid cuts are
/// kept with valid = false and the crossing edges in the diagnostic.
/// PlanError when the similarity matrix lacks a pair.
std::vector<MergePlan> enumerate_plans(const ModelGraph& donor, const ModelGraph& target, const SimilarityMatrix& sim,
                                       const AccuracyEstimator& est);

/// Largest savings among valid plans with S >= min_similarity.
struct MaxSavings {
  double min_similarity = kDefaultThreshold;
};

/// Highest estimated accuracy among valid plans saving at least budget_bytes.
struct MaxAccuracy {
  std::uint64_t budget_bytes = 0;
};

using SelectMode = std::variant<MaxSavings, MaxAccuracy>;

/// Ties break by higher similarity, then lower (donor, target) stage pair.
/// Returns nullopt when no plan is feasible.
std::optional<MergePlan> select_plan(std::span<const MergePlan> plans, const SelectMode& mode);

std::string plan_to_json_line(const MergePlan& plan);
std::string plans_to_jsonl(std::span<const MergePlan> plans);
/// Summary with the mode, counts and the selected plan (marked "selected": true) or null.
std::string plan_summary_json(std::span<const MergePlan> plans, const SelectMode& mode,
                              const std::optional<MergePlan>& selected);

}  // namespace repshare
