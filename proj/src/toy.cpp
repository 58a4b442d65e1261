#include "repshare/toy.hpp"

#include "repshare/npy.hpp"

#include <cmath>
#include <random>

namespace repshare {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kClasses = 10;
constexpr float kPerturbation = 0.5f;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  Tensor normal(Shape shape, float stddev) {
    Tensor t(std::move(shape));
    for (float& v : t.data()) v = stddev * dist_(engine_);
    return t;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<float> dist_{0.0f, 1.0f};
};

Tensor perturbed(const Tensor& base, Sampler& rng, float relative) {
  float sq = 0.0f;
  for (float v : base.data()) sq += v * v;
  const float scale = relative * std::sqrt(sq / static_cast<float>(base.size()));
  Tensor noise = rng.normal(base.shape(), scale);
  Tensor out = base;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise[i];
  return out;
}

StageSpec conv_stage(int id, std::string name, std::vector<int> inputs, ConvParams p, Shape3 out) {
  const std::string prefix = "weights/" + std::to_string(id) + "_";
  return {id, std::move(name), StageKind::conv2d, p, std::move(inputs), out,
          {{"kernel", prefix + "kernel.npy"}, {"bias", prefix + "bias.npy"}}};
}

StageSpec dense_stage(int id, std::vector<int> inputs, std::size_t in_dim) {
  const std::string prefix = "weights/" + std::to_string(id) + "_";
  return {id, "logits", StageKind::dense, DenseParams{in_dim, kClasses}, std::move(inputs), {kClasses, 1, 1},
          {{"kernel", prefix + "kernel.npy"}, {"bias", prefix + "bias.npy"}}};
}

StageSpec plain_stage(int id, std::string name, StageKind kind, StageParams params, std::vector<int> inputs, Shape3 out) {
  return {id, std::move(name), kind, params, std::move(inputs), out, {}};
}

float he_std(std::size_t fan_in) { return std::sqrt(2.0f / static_cast<float>(fan_in)); }

// Shared prefix: conv 3->8 (same padding), relu, 2x2 max pool.
void add_prefix(ModelGraph& g) {
  g.stages.push_back(conv_stage(0, "conv1", {}, ConvParams{3, 8, 3, 3, 1, 1}, {8, 32, 32}));
  g.stages.push_back(plain_stage(1, "relu1", StageKind::relu, {}, {0}, {8, 32, 32}));
  g.stages.push_back(plain_stage(2, "pool1", StageKind::maxpool2d, PoolParams{2, 2}, {1}, {8, 16, 16}));
}

}  // namespace

ToyPair gen_toy_pair(std::uint64_t seed, std::size_t n) {
  Sampler rng(seed);
  ToyPair pair;

  ModelGraph& a = pair.a.graph;
  a.name = "toy_a";
  a.input_shape = {3, 32, 32};
  add_prefix(a);
  a.stages.push_back(conv_stage(3, "conv2", {2}, ConvParams{8, 16, 3, 3, 1, 1}, {16, 16, 16}));
  a.stages.push_back(plain_stage(4, "relu2", StageKind::relu, {}, {3}, {16, 16, 16}));
  a.stages.push_back(plain_stage(5, "pool2", StageKind::maxpool2d, PoolParams{2, 2}, {4}, {16, 8, 8}));
  a.stages.push_back(dense_stage(6, {5}, 16 * 8 * 8));
  a.output_stage = 6;

  ModelGraph& b = pair.b.graph;
  b.name = "toy_b";
  b.input_shape = {3, 32, 32};
  add_prefix(b);
  b.stages.push_back(conv_stage(3, "conv2", {2}, ConvParams{8, 8, 3, 3, 1, 1}, {8, 16, 16}));
  b.stages.push_back(plain_stage(4, "residual", StageKind::add, {}, {2, 3}, {8, 16, 16}));
  b.stages.push_back(plain_stage(5, "pool2", StageKind::avgpool2d, PoolParams{2, 2}, {4}, {8, 8, 8}));
  b.stages.push_back(dense_stage(6, {5}, 8 * 8 * 8));
  b.output_stage = 6;

  // Shared prefix base, perturbed independently per model.
  const Tensor base_kernel = rng.normal({8, 3, 3, 3}, he_std(27));
  const Tensor base_bias = rng.normal({8}, 0.05f);
  pair.a.weights["weights/0_kernel.npy"] = perturbed(base_kernel, rng, kPerturbation);
  pair.a.weights["weights/0_bias.npy"] = perturbed(base_bias, rng, kPerturbation);
  pair.b.weights["weights/0_kernel.npy"] = perturbed(base_kernel, rng, kPerturbation);
  pair.b.weights["weights/0_bias.npy"] = perturbed(base_bias, rng, kPerturbation);

  pair.a.weights["weights/3_kernel.npy"] = rng.normal({16, 8, 3, 3}, he_std(72));
  pair.a.weights["weights/3_bias.npy"] = rng.normal({16}, 0.05f);
  pair.a.weights["weights/6_kernel.npy"] = rng.normal({kClasses, 16 * 8 * 8}, he_std(16 * 8 * 8));
  pair.a.weights["weights/6_bias.npy"] = rng.normal({kClasses}, 0.05f);

  pair.b.weights["weights/3_kernel.npy"] = rng.normal({8, 8, 3, 3}, he_std(72));
  pair.b.weights["weights/3_bias.npy"] = rng.normal({8}, 0.05f);
  pair.b.weights["weights/6_kernel.npy"] = rng.normal({kClasses, 8 * 8 * 8}, he_std(8 * 8 * 8));
  pair.b.weights["weights/6_bias.npy"] = rng.normal({kClasses}, 0.05f);

  pair.inputs = rng.normal({n, 3, 32, 32}, 1.0f);
  return pair;
}

void write_toy_pair(const ToyPair& pair, const fs::path& dir) {
  for (const ToyModel* m : {&pair.a, &pair.b}) {
    const fs::path model_dir = dir / m->graph.name;
    for (const auto& [rel, tensor] : m->weights) write_tensor(tensor, model_dir / rel);
    save_manifest(m->graph, model_dir / "manifest.json");
  }
  write_tensor(pair.inputs, dir / "inputs.npy");
}

}  // namespace repshare
