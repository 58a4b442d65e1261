#include "repshare/executor.hpp"
#include "repshare/metrics.hpp"
#include "repshare/npy.hpp"
#include "repshare/planner.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>

using namespace repshare;

namespace {

// Mirrors what an external exporter writes: opaque stages, no weights, one dumps dir per model.
void write_exported(const std::filesystem::path& dir, const std::string& model, std::uint64_t seed) {
  const nlohmann::json manifest = {
      {"name", model},
      {"input_shape", {3, 8, 8}},
      {"output_stage", 2},
      {"stages",
       {{{"id", 0}, {"name", "block1"}, {"kind", "opaque"}, {"params", {{"params_count", 448}}}, {"inputs", nlohmann::json::array()}, {"out_shape", {16, 8, 8}}},
        {{"id", 1}, {"name", "block2"}, {"kind", "opaque"}, {"params", {{"params_count", 4640}}}, {"inputs", {0}}, {"out_shape", {32, 4, 4}}},
        {{"id", 2}, {"name", "head"}, {"kind", "opaque"}, {"params", {{"params_count", 5130}}}, {"inputs", {1}}, {"out_shape", {10, 1, 1}}}}},
  };
  std::filesystem::create_directories(dir / model);
  std::ofstream(dir / model / "manifest.json") << manifest.dump(2);

  std::mt19937_64 rng(seed);
  nlohmann::json index = {{"model", model}, {"n", 8}, {"stages", nlohmann::json::object()}};
  const std::vector<Shape> shapes{{8, 16, 8, 8}, {8, 32, 4, 4}, {8, 10}};
  for (int id = 0; id < 3; ++id) {
    const std::string file = "stage" + std::to_string(id) + ".npy";
    write_tensor(test_support::random_tensor(shapes[id], rng), dir / model / "dumps" / file);
    index["stages"][std::to_string(id)] = file;
  }
  std::ofstream(dir / model / "dumps" / "dumps.json") << index.dump(2);
}

}  // namespace

TEST_CASE("exporter-style output feeds the similarity and planning path") {
  test_support::TempDir dir("t");
  write_exported(dir.path(), "ext_a", 1);
  write_exported(dir.path(), "ext_b", 2);

  const ModelGraph ga = load_manifest(dir.path() / "ext_a" / "manifest.json");
  const ModelGraph gb = load_manifest(dir.path() / "ext_b" / "manifest.json");
  CHECK(ga.stage(0).kind == StageKind::opaque);
  const auto metrics = stage_metrics(gb);
  CHECK(metrics[1].param_count == 4640);
  CHECK(memory_savings(gb, 1) == (448 + 4640) * 4);

  const DumpSet da = read_dumps(dir.path() / "ext_a" / "dumps" / "dumps.json");
  const DumpSet db = read_dumps(dir.path() / "ext_b" / "dumps");
  CHECK(da.reps.n() == 8);
  CHECK(da.reps.at(2).shape() == Shape{8, 10, 1, 1});

  const auto sim = similarity_matrix(da.reps, db.reps, SimilarityMode::cross_stage);
  const auto self = similarity_matrix(da.reps, read_dumps(dir.path() / "ext_a" / "dumps").reps, SimilarityMode::same_stage);
  for (int id = 0; id < 3; ++id) CHECK(std::abs(self.at(id, id) - 1.0) <= 1e-9);

  const auto plans = enumerate_plans(ga, gb, sim, AccuracyEstimator{});
  CHECK(plans.size() == 9);
  const auto chosen = select_plan(plans, MaxSavings{0.0});
  REQUIRE(chosen.has_value());
  CHECK(chosen->target_stage == 2);

  std::vector<CorrelationRow> rows;
  for (const auto& p : plans) rows.push_back({p.estimated_accuracy, p.similarity, 1.0, 2.0 + p.target_stage, 3.0 * p.target_stage});
  CHECK(correlate_table(rows).size() == 4);
}

TEST_CASE("exported dumps are rejected when malformed") {
  test_support::TempDir dir("t");
  write_exported(dir.path(), "ext", 3);
  const auto dumps = dir.path() / "ext" / "dumps";
  nlohmann::json index = nlohmann::json::parse(std::ifstream(dumps / "dumps.json"));
  index["n"] = 9;
  std::ofstream(dumps / "dumps.json") << index.dump();
  CHECK_THROWS_AS(read_dumps(dumps), ShapeError);

  index["n"] = 8;
  index["stages"]["0"] = "missing.npy";
  std::ofstream(dumps / "dumps.json") << index.dump();
  CHECK_THROWS_AS(read_dumps(dumps), IoError);
}
