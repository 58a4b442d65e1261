#include "repshare/planner.hpp"

#include <json.hpp>

#include <tuple>

namespace repshare {

using ordered_json = nlohmann::ordered_json;

std::vector<MergePlan> enumerate_plans(const ModelGraph& donor, const ModelGraph& target, const SimilarityMatrix& sim,
                                       const AccuracyEstimator& est) {
  std::vector<MergePlan> plans;
  plans.reserve(donor.size() * target.size());
  std::vector<CutCheck> cuts;
  std::vector<std::uint64_t> savings;
  for (const auto& t : target.stages) {
    cuts.push_back(valid_cut(target, t.id));
    savings.push_back(memory_savings(target, t.id));
  }
  for (const auto& s : donor.stages) {
    for (const auto& t : target.stages) {
      MergePlan p;
      p.donor_model = donor.name;
      p.donor_stage = s.id;
      p.target_model = target.name;
      p.target_stage = t.id;
      p.similarity = sim.at(s.id, t.id);
      p.adapt = plan_adapt(s.out_shape, t.out_shape);
      p.savings_bytes = savings[static_cast<std::size_t>(t.id)];
      p.estimated_accuracy = est.estimate(p.similarity);
      const CutCheck& cut = cuts[static_cast<std::size_t>(t.id)];
      p.valid = cut.valid;
      p.diagnostic = cut.diagnostic();
      plans.push_back(std::move(p));
    }
  }
  return plans;
}

std::optional<MergePlan> select_plan(std::span<const MergePlan> plans, const SelectMode& mode) {
  const MergePlan* best = nullptr;
  // Lexicographic key, larger is better.
  auto key = [&mode](const MergePlan& p) {
    const double primary = std::holds_alternative<MaxSavings>(mode) ? static_cast<double>(p.savings_bytes) : p.estimated_accuracy;
    return std::make_tuple(primary, p.similarity, -p.donor_stage, -p.target_stage);
  };
  for (const auto& p : plans) {
    if (!p.valid) continue;
    const bool feasible = std::visit(
        [&p](const auto& m) {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MaxSavings>) {
            return p.similarity >= m.min_similarity;
          } else {
            return p.savings_bytes >= m.budget_bytes;
          }
        },
        mode);
    if (!feasible) continue;
    if (!best || key(p) > key(*best)) best = &p;
  }
  if (!best) return std::nullopt;
  return *best;
}

namespace {

ordered_json plan_json(const MergePlan& p) {
  ordered_json j;
  j["donor_model"] = p.donor_model;
  j["donor_stage"] = p.donor_stage;
  j["target_model"] = p.target_model;
  j["target_stage"] = p.target_stage;
  j["similarity"] = p.similarity;
  j["adapt"] = {
      {"src_shape", {p.adapt.src.c, p.adapt.src.h, p.adapt.src.w}},
      {"dst_shape", {p.adapt.dst.c, p.adapt.dst.h, p.adapt.dst.w}},
      {"channel_map", p.adapt.channel_map},
      {"spatial_mode", std::string(to_string(p.adapt.spatial))},
  };
  j["savings_bytes"] = p.savings_bytes;
  j["estimated_accuracy"] = p.estimated_accuracy;
  j["valid"] = p.valid;
  j["diagnostic"] = p.diagnostic;
  return j;
}

}  // namespace

std::string plan_to_json_line(const MergePlan& plan) { return plan_json(plan).dump(); }

std::string plans_to_jsonl(std::span<const MergePlan> plans) {
  std::string out;
  for (const auto& p : plans) out += plan_to_json_line(p) + "\n";
  return out;
}

std::string plan_summary_json(std::span<const MergePlan> plans, const SelectMode& mode,
                              const std::optional<MergePlan>& selected) {
  ordered_json j;
  if (const auto* m = std::get_if<MaxSavings>(&mode)) {
    j["mode"] = "max-savings";
    j["min_similarity"] = m->min_similarity;
  } else {
    j["mode"] = "max-accuracy";
    j["budget_bytes"] = std::get<MaxAccuracy>(mode).budget_bytes;
  }
  j["plan_count"] = plans.size();
  j["valid_count"] = std::count_if(plans.begin(), plans.end(), [](const MergePlan& p) { return p.valid; });
  if (selected) {
    ordered_json s = plan_json(*selected);
    s["selected"] = true;
    j["selected"] = std::move(s);
  } else {
    j["selected"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace repshare
