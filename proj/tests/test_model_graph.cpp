#include "repshare/error.hpp"
#include "repshare/io.hpp"
#include "repshare/model_graph.hpp"
#include "repshare/npy.hpp"
#include "repshare/toy.hpp"
#include "graph_fixtures.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace repshare;
using test_support::TempDir;

TEST_CASE("shape inference arithmetic") {
  ModelGraph g;
  g.name = "shapes";
  g.input_shape = {3, 32, 32};
  g.stages.push_back({0, "c", StageKind::conv2d, ConvParams{3, 4, 5, 5, 2, 0}, {}, {4, 14, 14}, {}});
  g.stages.push_back({1, "same", StageKind::conv2d, ConvParams{4, 6, 3, 3, 1, 1}, {0}, {6, 14, 14}, {}});
  g.stages.push_back({2, "pool", StageKind::maxpool2d, PoolParams{2, 2}, {1}, {6, 7, 7}, {}});
  g.stages.push_back({3, "gap", StageKind::global_avg_pool, {}, {2}, {6, 1, 1}, {}});
  g.stages.push_back({4, "fc", StageKind::dense, DenseParams{6, 3}, {3}, {3, 1, 1}, {}});
  g.output_stage = 4;
  const auto shapes = infer_shapes(g);
  CHECK(shapes[0] == Shape3{4, 14, 14});
  CHECK(shapes[1] == Shape3{6, 14, 14});
  CHECK(shapes[2] == Shape3{6, 7, 7});

  g.stages[0].out_shape = {5, 14, 14};
  try {
    infer_shapes(g);
    FAIL("expected GraphError");
  } catch (const GraphError& e) {
    CHECK(e.stage_id() == 0);
  }
}

TEST_CASE("graph invariants are enforced") {
  ModelGraph g = fixtures::chain_graph();
  SUBCASE("conv output channels must match out_shape") {
    g.stages[0].out_shape = {9, 16, 16};
    CHECK_THROWS_AS(infer_shapes(g), GraphError);
  }
  SUBCASE("dangling input") {
    g.stages[1].inputs = {5};
    CHECK_THROWS_AS(infer_shapes(g), GraphError);
  }
  SUBCASE("add producers must agree") {
    g.stages.insert(g.stages.begin() + 3, StageSpec{3, "bad_add", StageKind::add, {}, {0, 2}, {8, 16, 16}, {}});
    g.stages[4].id = 4;
    g.output_stage = 4;
    try {
      infer_shapes(g);
      FAIL("expected GraphError");
    } catch (const GraphError& e) {
      CHECK(e.stage_id() == 3);
    }
  }
  SUBCASE("concat needs equal resolution") {
    g.stages.insert(g.stages.begin() + 3, StageSpec{3, "cat", StageKind::concat_channels, {}, {0, 1}, {16, 16, 16}, {}});
    g.stages[4].id = 4;
    g.stages[4].inputs = {2};
    g.output_stage = 4;
    CHECK_NOTHROW(infer_shapes(g));
    g.stages[3].inputs = {0, 2};
    CHECK_THROWS_AS(infer_shapes(g), GraphError);
  }
  SUBCASE("window larger than input") {
    g.stages[2].params = PoolParams{32, 1};
    CHECK_THROWS_AS(infer_shapes(g), GraphError);
  }
}

TEST_CASE("manifest loading") {
  TempDir dir("manifest");
  const ModelGraph g = fixtures::chain_graph();
  save_manifest(g, dir / "m.json");

  SUBCASE("missing weight file is an io error") { CHECK_THROWS_AS(load_manifest(dir / "m.json"), IoError); }
  SUBCASE("well-formed chain loads") {
    write_tensor(Tensor({8, 3, 3, 3}), dir / "w/0k.npy");
    write_tensor(Tensor({10, 512}), dir / "w/3k.npy");
    const ModelGraph loaded = load_manifest(dir / "m.json");
    CHECK(loaded.stages == g.stages);
    CHECK(loaded.base_dir == dir.path());
  }
  SUBCASE("weight with the wrong shape") {
    write_tensor(Tensor({8, 3, 3, 1}), dir / "w/0k.npy");
    write_tensor(Tensor({10, 512}), dir / "w/3k.npy");
    CHECK_THROWS_AS(load_manifest(dir / "m.json"), GraphError);
  }
  SUBCASE("malformed json") {
    write_file_atomic(dir / "bad.json", "{\"name\": ");
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), FormatError);
  }
  SUBCASE("unknown kind") {
    write_file_atomic(dir / "kind.json",
                      R"({"name":"x","input_shape":[1,1,1],"output_stage":0,"stages":[{"id":0,"kind":"lstm","inputs":[],"out_shape":[1,1,1]}]})");
    CHECK_THROWS_AS(load_manifest(dir / "kind.json"), FormatError);
  }
}

TEST_CASE("valid_cut on small graphs") {
  const ModelGraph chain = fixtures::chain_graph();
  for (const auto& s : chain.stages) CHECK(valid_cut(chain, s.id).valid);
  CHECK_THROWS_AS(valid_cut(chain, 7), GraphError);

  // Skip from t-1 to t+2 with t = 2.
  ModelGraph g;
  g.name = "skip";
  g.input_shape = {1, 1, 1};
  for (int id = 0; id < 5; ++id) g.stages.push_back({id, "", StageKind::relu, {}, id ? std::vector<int>{id - 1} : std::vector<int>{}, {1, 1, 1}, {}});
  g.stages[4] = {4, "", StageKind::add, {}, {1, 3}, {1, 1, 1}, {}};
  g.output_stage = 4;
  REQUIRE_NOTHROW(infer_shapes(g));
  const CutCheck cut = valid_cut(g, 2);
  CHECK_FALSE(cut.valid);
  CHECK(cut.crossing_edges == std::vector<std::pair<int, int>>{{1, 4}});
  CHECK(cut.diagnostic().find("(1 -> 4)") != std::string::npos);
  CHECK(valid_cut(g, 1).valid);
  CHECK(valid_cut(g, 3).crossing_edges == std::vector<std::pair<int, int>>{{1, 4}});
  CHECK(valid_cut(g, 0).valid);
  CHECK(valid_cut(g, 4).valid);
}

TEST_CASE("valid_cut equals a brute-force edge scan") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const ModelGraph g = fixtures::random_dag(rng);
    REQUIRE_NOTHROW(infer_shapes(g));
    for (const auto& s : g.stages) {
      const CutCheck cut = valid_cut(g, s.id);
      const auto expected = oracle::crossing_edges(g, s.id);
      CHECK(cut.crossing_edges == expected);
      CHECK(cut.valid == expected.empty());
    }
  }
}

TEST_CASE("toy pair structure") {
  const ToyPair pair = gen_toy_pair(0, 8);
  for (const ModelGraph* g : {&pair.a.graph, &pair.b.graph}) {
    CHECK(g->size() >= 5);
    CHECK(g->size() <= 7);
    CHECK(g->input_shape == Shape3{3, 32, 32});
    CHECK(g->stage(g->output_stage).out_shape == Shape3{10, 1, 1});
    for (const auto& s : g->stages) CHECK(s.out_shape.c <= 64);
    CHECK_NOTHROW(infer_shapes(*g));
  }
  for (int id = 0; id < 3; ++id) {
    CHECK(pair.a.graph.stages[id].kind == pair.b.graph.stages[id].kind);
    CHECK(pair.a.graph.stages[id].params == pair.b.graph.stages[id].params);
  }
  CHECK(bit_equal(pair.a.weights.at("weights/0_kernel.npy"), pair.a.weights.at("weights/0_kernel.npy")));
  CHECK_FALSE(bit_equal(pair.a.weights.at("weights/0_kernel.npy"), pair.b.weights.at("weights/0_kernel.npy")));

  bool any_invalid = false;
  for (const auto& s : pair.b.graph.stages) any_invalid |= !valid_cut(pair.b.graph, s.id).valid;
  CHECK(any_invalid);
  for (const auto& s : pair.a.graph.stages) CHECK(valid_cut(pair.a.graph, s.id).valid);

  // The last stage before the output has its residual edge inside the prefix.
  CHECK(valid_cut(pair.b.graph, pair.b.graph.output_stage - 1).valid);
}

TEST_CASE("toy pair files load, round-trip and are deterministic") {
  TempDir one("toy1"), two("toy2");
  write_toy_pair(gen_toy_pair(0, 8), one.path());
  write_toy_pair(gen_toy_pair(0, 8), two.path());
  for (const auto& entry : std::filesystem::recursive_directory_iterator(one.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), one.path());
    CHECK(read_file(entry.path()) == read_file(two.path() / rel));
  }
  const ToyPair pair = gen_toy_pair(0, 8);
  const ModelGraph a = load_manifest(one / "toy_a/manifest.json");
  CHECK(a.stages == pair.a.graph.stages);
  CHECK(a.name == pair.a.graph.name);
  CHECK(manifest_to_json(a) == manifest_to_json(pair.a.graph));
  CHECK_FALSE(bit_equal(gen_toy_pair(1, 8).inputs, pair.inputs));
}
