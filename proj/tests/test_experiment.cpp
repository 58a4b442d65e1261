#include "repshare/experiment.hpp"
#include "repshare/toy.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace repshare;

TEST_CASE("same-stage sweep of a model against itself") {
  const ToyPair pair = gen_toy_pair(1, 16);
  WeightStore wa = pair.a.store(), wa2 = pair.a.store();
  const SweepResult r = run_sweep(pair.a.graph, wa, pair.a.graph, wa2, pair.inputs, SimilarityMode::same_stage);
  REQUIRE(r.rows.size() == pair.a.graph.size());
  for (const auto& row : r.rows) {
    CHECK(row.donor_stage == row.target_stage);
    CHECK(row.fidelity == 1.0);
    CHECK(std::abs(row.similarity - 1.0) <= 1e-9);
  }
  CHECK(r.metrics.size() == r.rows.size());
  CHECK(sweep_csv(r.rows).rfind("s,t,S,fidelity,savings_bytes\n", 0) == 0);
}

TEST_CASE("cross-stage sweep covers every valid pair") {
  const ToyPair pair = gen_toy_pair(2, 16);
  WeightStore wa = pair.a.store(), wb = pair.b.store();
  const SweepResult r = run_sweep(pair.a.graph, wa, pair.b.graph, wb, pair.inputs, SimilarityMode::cross_stage);
  std::size_t valid = 0;
  for (const auto& s : pair.b.graph.stages) valid += valid_cut(pair.b.graph, s.id).valid ? 1 : 0;
  CHECK(valid == pair.b.graph.size() - 1);
  CHECK(r.rows.size() == pair.a.graph.size() * valid);
  CHECK(std::none_of(r.rows.begin(), r.rows.end(), [](const SweepRow& row) { return row.target_stage == 3; }));
  for (const auto& row : r.rows) {
    CHECK(row.fidelity >= 0.0);
    CHECK(row.fidelity <= 1.0);
    CHECK(row.savings_bytes == memory_savings(pair.b.graph, row.target_stage));
  }
}

TEST_CASE("noise sweep") {
  const auto sigmas = default_sigmas();
  REQUIRE(sigmas.size() == 10);
  const auto rows = run_noise_sweep(0, sigmas);
  REQUIRE(rows.size() == sigmas.size());
  CHECK(rows[0].sigma == 0.0);
  CHECK(std::abs(rows[0].similarity - 1.0) <= 1e-9);
  CHECK(rows[0].fidelity == 1.0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].similarity <= rows[i - 1].similarity + 0.02);

  std::vector<double> s, f;
  for (const auto& r : rows) {
    s.push_back(r.similarity);
    f.push_back(r.fidelity);
  }
  CHECK(pearson(s, f) >= 0.8);
  CHECK(noise_csv(rows) == noise_csv(run_noise_sweep(0, sigmas)));
  CHECK(noise_csv(rows).rfind("sigma,S,fidelity\n", 0) == 0);
}

TEST_CASE("noise sweep similarity is recomputable from stored dumps") {
  const ToyPair pair = gen_toy_pair(3, 16);
  WeightStore w = pair.b.store();
  const std::vector<double> sigmas{0.0, 1.0};
  const auto rows = run_noise_sweep(pair.b.graph, w, pair.inputs, 2, sigmas, 11);

  test_support::TempDir dir("t");
  const auto dumps = forward(pair.b.graph, w, pair.inputs).dumps;
  write_dumps({"toy_b", dumps}, dir.path());
  const DumpSet back = read_dumps(dir.path() / "toy_b");
  CHECK(cka(back.reps.at(2), dumps.at(2)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rows[1].similarity < 1.0);
  CHECK(rows[1].similarity > 0.0);
}

TEST_CASE("sweep similarities equal recomputation from stored dump files") {
  const ToyPair pair = gen_toy_pair(4, 16);
  WeightStore wa = pair.a.store(), wb = pair.b.store();
  const SweepResult r = run_sweep(pair.a.graph, wa, pair.b.graph, wb, pair.inputs, SimilarityMode::cross_stage);

  test_support::TempDir dir("t");
  write_dumps({"toy_a", forward(pair.a.graph, wa, pair.inputs).dumps}, dir.path());
  write_dumps({"toy_b", forward(pair.b.graph, wb, pair.inputs).dumps}, dir.path());
  const DumpSet da = read_dumps(dir.path() / "toy_a");
  const DumpSet db = read_dumps(dir.path() / "toy_b");
  for (const auto& row : r.rows) {
    CHECK(row.similarity == cka(da.reps.at(row.donor_stage), db.reps.at(row.target_stage)));
  }
}
