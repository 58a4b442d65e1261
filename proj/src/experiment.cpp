#include "repshare/experiment.hpp"

#include "repshare/error.hpp"
#include "repshare/io.hpp"
#include "repshare/toy.hpp"

#include <cmath>
#include <random>

namespace repshare {

SweepResult run_sweep(const ModelGraph& a, WeightStore& weights_a, const ModelGraph& b, WeightStore& weights_b,
                      const Tensor& inputs, SimilarityMode mode) {
  const ForwardResult ra = forward(a, weights_a, inputs);
  const ForwardResult rb = forward(b, weights_b, inputs);

  SweepResult result;
  result.similarity = similarity_matrix(ra.dumps, rb.dumps, mode);
  const auto metrics_b = stage_metrics(b);

  const auto& ids_a = result.similarity.stages_a;
  const auto& ids_b = result.similarity.stages_b;
  for (std::size_t i = 0; i < ids_a.size(); ++i) {
    for (std::size_t j = 0; j < ids_b.size(); ++j) {
      if (mode == SimilarityMode::same_stage && i != j) continue;
      const int s = ids_a[i];
      const int t = ids_b[j];
      if (!valid_cut(b, t).valid) continue;
      SweepRow row;
      row.donor_stage = s;
      row.target_stage = t;
      row.similarity = result.similarity.at(s, t);
      const Tensor merged = forward_merged(b, weights_b, make_injection(b, t, ra.dumps.at(s)));
      row.fidelity = fidelity(merged, rb.predictions);
      row.savings_bytes = memory_savings(b, t);
      result.rows.push_back(row);

      const StageMetrics& m = metrics_b[static_cast<std::size_t>(t)];
      result.metrics.push_back({row.fidelity, row.similarity, static_cast<double>(m.flops),
                                static_cast<double>(m.rep_size_bytes), static_cast<double>(m.param_count)});
    }
  }
  return result;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "s,t,S,fidelity,savings_bytes\n";
  for (const auto& r : rows) {
    out += std::to_string(r.donor_stage) + "," + std::to_string(r.target_stage) + "," + format_number(r.similarity) + "," +
           format_number(r.fidelity) + "," + std::to_string(r.savings_bytes) + "\n";
  }
  return out;
}

std::vector<NoiseRow> run_noise_sweep(const ModelGraph& g, WeightStore& weights, const Tensor& inputs, int target_stage,
                                      std::span<const double> sigmas, std::uint64_t seed) {
  const CutCheck cut = valid_cut(g, target_stage);
  if (!cut.valid) throw CutViolation("noise sweep target stage " + std::to_string(target_stage) + ": " + cut.diagnostic());
  const ForwardResult base = forward(g, weights, inputs);
  const Tensor& dump = base.dumps.at(target_stage);

  const Eigen::Map<const Eigen::ArrayXf> values(dump.data().data(), static_cast<Eigen::Index>(dump.size()));
  const double mean = values.cast<double>().mean();
  const double stddev = std::sqrt((values.cast<double>() - mean).square().mean());

  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> draw(dump.size());
  for (double& z : draw) z = normal(engine);

  std::vector<NoiseRow> rows;
  for (double sigma : sigmas) {
    Tensor donor = dump;
    if (sigma != 0.0) {
      for (std::size_t i = 0; i < donor.size(); ++i) donor[i] = static_cast<float>(donor[i] + sigma * stddev * draw[i]);
    }
    NoiseRow row;
    row.sigma = sigma;
    row.similarity = cka(donor, dump);
    row.fidelity = fidelity(forward_merged(g, weights, make_injection(g, target_stage, std::move(donor))), base.predictions);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> default_sigmas() { return {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0}; }

std::vector<NoiseRow> run_noise_sweep(std::uint64_t seed, std::span<const double> sigmas, int target_stage, std::size_t n) {
  const ToyPair pair = gen_toy_pair(seed, n);
  WeightStore weights = pair.b.store();
  return run_noise_sweep(pair.b.graph, weights, pair.inputs, target_stage, sigmas, seed);
}

std::string noise_csv(std::span<const NoiseRow> rows) {
  std::string out = "sigma,S,fidelity\n";
  for (const auto& r : rows) {
    out += format_number(r.sigma) + "," + format_number(r.similarity) + "," + format_number(r.fidelity) + "\n";
  }
  return out;
}

}  // namespace repshare
