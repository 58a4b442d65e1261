#include "repshare/executor.hpp"

#include "repshare/error.hpp"
#include "repshare/io.hpp"
#include "repshare/kernels.hpp"
#include "repshare/npy.hpp"

#include <json.hpp>

#include <optional>
#include <variant>

namespace repshare {

namespace fs = std::filesystem;

WeightStore::WeightStore(std::map<std::string, Tensor> preloaded)
    : cache_(std::move(preloaded)), memory_only_(true) {}

const Tensor& WeightStore::fetch(const fs::path& path) {
  const std::string key = path.string();
  touched_.insert(key);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  if (memory_only_) throw IoError("weight " + key + " is not in the in-memory store");
  return cache_.emplace(key, read_tensor(path)).first->second;
}

namespace {

struct Placeholder {};
using Slot = std::variant<std::monostate, Placeholder, Tensor>;

class StageRunner {
 public:
  StageRunner(const ModelGraph& g, WeightStore& weights, const Tensor* model_input)
      : g_(g), weights_(weights), model_input_(model_input), slots_(g.size()) {}

  void place(int id, Tensor t) { slots_[static_cast<std::size_t>(id)] = std::move(t); }
  void reserve_placeholder(int id) { slots_[static_cast<std::size_t>(id)] = Placeholder{}; }

  void run_from(int first) {
    for (std::size_t u = static_cast<std::size_t>(first); u < g_.size(); ++u) {
      const StageSpec& s = g_.stages[u];
      Tensor out = run_stage(s);
      if (out.feature_shape() != s.out_shape) {
        throw GraphError(s.id, "internal: produced " + to_string(out.feature_shape()) + ", declared " + to_string(s.out_shape));
      }
      slots_[u] = std::move(out);
    }
  }

  const Tensor& output(int id) const { return std::get<Tensor>(slots_[static_cast<std::size_t>(id)]); }

 private:
  const Tensor& read(int consumer, int producer) const {
    if (producer == kModelInput) {
      if (!model_input_) throw CutViolation("stage " + std::to_string(consumer) + " reads the model input, which is offloaded");
      return *model_input_;
    }
    const Slot& slot = slots_[static_cast<std::size_t>(producer)];
    if (std::holds_alternative<Placeholder>(slot)) {
      throw CutViolation("stage " + std::to_string(consumer) + " reads placeholder slot " + std::to_string(producer));
    }
    if (!std::holds_alternative<Tensor>(slot)) {
      throw GraphError(consumer, "internal: input " + std::to_string(producer) + " has not been computed");
    }
    return std::get<Tensor>(slot);
  }

  const Tensor* optional_weight(const StageSpec& s, const std::string& role) {
    if (!s.weights.count(role)) return nullptr;
    return &weights_.fetch(g_.weight_path(s, role));
  }

  Tensor run_stage(const StageSpec& s) {
    std::vector<const Tensor*> in;
    if (s.inputs.empty()) {
      in.push_back(&read(s.id, kModelInput));
    } else {
      for (int p : s.inputs) in.push_back(&read(s.id, p));
    }
    switch (s.kind) {
      case StageKind::conv2d:
        return kernels::conv2d(*in[0], weights_.fetch(g_.weight_path(s, "kernel")), optional_weight(s, "bias"),
                               std::get<ConvParams>(s.params));
      case StageKind::relu:
        return kernels::relu(*in[0]);
      case StageKind::maxpool2d:
        return kernels::max_pool(*in[0], std::get<PoolParams>(s.params));
      case StageKind::avgpool2d:
        return kernels::avg_pool(*in[0], std::get<PoolParams>(s.params));
      case StageKind::global_avg_pool:
        return kernels::global_avg_pool(*in[0]);
      case StageKind::dense:
        return kernels::dense(*in[0], weights_.fetch(g_.weight_path(s, "kernel")), optional_weight(s, "bias"));
      case StageKind::add:
        return kernels::add(in);
      case StageKind::concat_channels:
        return kernels::concat_channels(in);
      case StageKind::opaque:
        break;
    }
    throw GraphError(s.id, "opaque stages cannot be executed");
  }

  const ModelGraph& g_;
  WeightStore& weights_;
  const Tensor* model_input_;
  std::vector<Slot> slots_;
};

Tensor predictions_of(const ModelGraph& g, const StageRunner& runner) {
  const Tensor& out = runner.output(g.output_stage);
  return out.reshaped({out.dim(0), out.size() / out.dim(0)});
}

}  // namespace

ForwardResult forward(const ModelGraph& g, WeightStore& weights, const Tensor& inputs) {
  const Tensor batch = as_representation(inputs);
  if (batch.feature_shape() != g.input_shape) {
    throw ShapeError("inputs have shape " + to_string(batch.feature_shape()) + ", model '" + g.name + "' expects " +
                     to_string(g.input_shape));
  }
  StageRunner runner(g, weights, &batch);
  runner.run_from(0);
  ForwardResult result;
  result.predictions = predictions_of(g, runner);
  for (const auto& s : g.stages) result.dumps.add(s.id, runner.output(s.id));
  return result;
}

InjectionPoint make_injection(const ModelGraph& g, int target_stage, Tensor donor_rep) {
  donor_rep = as_representation(std::move(donor_rep));
  AdaptSpec adapt = plan_adapt(donor_rep.feature_shape(), g.stage(target_stage).out_shape);
  return {target_stage, std::move(donor_rep), std::move(adapt)};
}

Tensor forward_merged(const ModelGraph& g, WeightStore& weights, const InjectionPoint& inj) {
  const StageSpec& target = g.stage(inj.target_stage);
  if (inj.adapt.dst != target.out_shape) {
    throw ShapeError("adapter produces " + to_string(inj.adapt.dst) + " but stage " + std::to_string(target.id) +
                     " outputs " + to_string(target.out_shape));
  }
  StageRunner runner(g, weights, nullptr);
  for (int id = 0; id < inj.target_stage; ++id) runner.reserve_placeholder(id);
  runner.place(inj.target_stage, apply_adapt(inj.adapt, inj.donor_rep));
  runner.run_from(inj.target_stage + 1);
  return predictions_of(g, runner);
}

std::vector<std::size_t> argmax_rows(const Tensor& predictions) {
  if (predictions.rank() == 0 || predictions.size() == 0) throw ShapeError("predictions must be a non-empty batch");
  const auto m = predictions.rows();
  std::vector<std::size_t> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < m.cols(); ++k) {
      if (m(i, k) > m(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

double fidelity(const Tensor& merged, const Tensor& original) {
  if (merged.rank() == 0 || merged.rows().rows() != original.rows().rows() || merged.size() != original.size()) {
    throw ShapeError("prediction shapes differ: " + to_string(merged.shape()) + " vs " + to_string(original.shape()));
  }
  const auto a = argmax_rows(merged);
  const auto b = argmax_rows(original);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(agree) / static_cast<double>(a.size());
}

fs::path write_dumps(const DumpSet& dumps, const fs::path& out_dir) {
  const fs::path dir = out_dir / dumps.model;
  nlohmann::ordered_json index;
  index["model"] = dumps.model;
  index["n"] = dumps.reps.n();
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (const auto& [id, rep] : dumps.reps.stages()) {
    const std::string file = std::to_string(id) + ".npy";
    write_tensor(rep, dir / file);
    stages[std::to_string(id)] = file;
  }
  index["stages"] = std::move(stages);
  const fs::path index_path = dir / "dumps.json";
  write_file_atomic(index_path, index.dump(2) + "\n");
  return index_path;
}

DumpSet read_dumps(const fs::path& path) {
  const fs::path index_path = fs::is_directory(path) ? path / "dumps.json" : path;
  const std::string text = read_file(index_path);
  DumpSet dumps;
  std::size_t declared_n = 0;
  std::vector<std::pair<int, std::string>> entries;
  try {
    const auto j = nlohmann::json::parse(text);
    dumps.model = j.at("model").get<std::string>();
    declared_n = j.at("n").get<std::size_t>();
    for (const auto& [key, value] : j.at("stages").items()) entries.emplace_back(std::stoi(key), value.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError(index_path.string() + ": stage keys must be integer ids");
  }
  for (const auto& [id, file] : entries) {
    dumps.reps.add(id, read_tensor(index_path.parent_path() / file));
  }
  if (dumps.reps.empty()) throw FormatError(index_path.string() + ": no stages listed");
  if (dumps.reps.n() != declared_n) {
    throw ShapeError(index_path.string() + ": index declares n = " + std::to_string(declared_n) + " but dumps have n = " +
                     std::to_string(dumps.reps.n()));
  }
  return dumps;
}

}  // namespace repshare
