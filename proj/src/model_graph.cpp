#include "repshare/model_graph.hpp"

#include "repshare/error.hpp"
#include "repshare/io.hpp"
#include "repshare/npy.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>

namespace repshare {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<StageKind, std::string_view>, 9> kKindNames = {{
    {StageKind::conv2d, "conv2d"},
    {StageKind::relu, "relu"},
    {StageKind::maxpool2d, "maxpool2d"},
    {StageKind::avgpool2d, "avgpool2d"},
    {StageKind::global_avg_pool, "global_avg_pool"},
    {StageKind::dense, "dense"},
    {StageKind::add, "add"},
    {StageKind::concat_channels, "concat_channels"},
    {StageKind::opaque, "opaque"},
}};

Shape3 shape3_from_json(const json& j) {
  const auto v = j.get<std::vector<std::size_t>>();
  if (v.size() != 3) throw FormatError("shape must have three entries [C, H, W]");
  return {v[0], v[1], v[2]};
}

json shape3_to_json(const Shape3& s) { return json::array({s.c, s.h, s.w}); }

std::size_t positive(const json& params, const char* key, int stage_id) {
  if (!params.contains(key)) throw GraphError(stage_id, std::string("missing param '") + key + "'");
  const auto v = params.at(key).get<std::int64_t>();
  if (v <= 0) throw GraphError(stage_id, std::string("param '") + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

StageParams params_from_json(StageKind kind, const json& p, int id) {
  switch (kind) {
    case StageKind::conv2d: {
      ConvParams c;
      c.c_in = positive(p, "c_in", id);
      c.c_out = positive(p, "c_out", id);
      c.k_h = positive(p, "k_h", id);
      c.k_w = positive(p, "k_w", id);
      c.stride = p.contains("stride") ? positive(p, "stride", id) : 1;
      const auto pad = p.value("pad", std::int64_t{0});
      if (pad < 0) throw GraphError(id, "param 'pad' must be non-negative");
      c.pad = static_cast<std::size_t>(pad);
      return c;
    }
    case StageKind::dense:
      return DenseParams{positive(p, "in_dim", id), positive(p, "out_dim", id)};
    case StageKind::maxpool2d:
    case StageKind::avgpool2d:
      return PoolParams{positive(p, "window", id), p.contains("stride") ? positive(p, "stride", id) : positive(p, "window", id)};
    case StageKind::opaque: {
      const auto count = p.value("params_count", std::int64_t{0});
      if (count < 0) throw GraphError(id, "param 'params_count' must be non-negative");
      return OpaqueParams{static_cast<std::size_t>(count)};
    }
    default:
      return std::monostate{};
  }
}

json params_to_json(const StageParams& params) {
  json j = json::object();
  if (const auto* c = std::get_if<ConvParams>(&params)) {
    j = {{"c_in", c->c_in}, {"c_out", c->c_out}, {"k_h", c->k_h}, {"k_w", c->k_w}, {"stride", c->stride}, {"pad", c->pad}};
  } else if (const auto* d = std::get_if<DenseParams>(&params)) {
    j = {{"in_dim", d->in_dim}, {"out_dim", d->out_dim}};
  } else if (const auto* p = std::get_if<PoolParams>(&params)) {
    j = {{"window", p->window}, {"stride", p->stride}};
  } else if (const auto* o = std::get_if<OpaqueParams>(&params)) {
    j = {{"params_count", o->params_count}};
  }
  return j;
}

// Output extent of a sliding window; GraphError when it would be non-positive.
std::size_t window_extent(std::size_t in, std::size_t pad, std::size_t window, std::size_t stride, int id) {
  const auto span = static_cast<std::int64_t>(in) + 2 * static_cast<std::int64_t>(pad) - static_cast<std::int64_t>(window);
  if (span < 0) {
    throw GraphError(id, "window " + std::to_string(window) + " does not fit input extent " + std::to_string(in) +
                             " with padding " + std::to_string(pad));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

}  // namespace

std::string_view to_string(StageKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

StageKind parse_stage_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw FormatError("unknown stage kind '" + std::string(text) + "'");
}

const StageSpec& ModelGraph::stage(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= stages.size()) {
    throw GraphError(id, "unknown stage id in model '" + name + "'");
  }
  return stages[static_cast<std::size_t>(id)];
}

fs::path ModelGraph::weight_path(const StageSpec& s, const std::string& role) const {
  auto it = s.weights.find(role);
  if (it == s.weights.end()) throw GraphError(s.id, "no '" + role + "' weight file");
  return base_dir / it->second;
}

Shape expected_weight_shape(const StageSpec& s, const std::string& role) {
  if (const auto* c = std::get_if<ConvParams>(&s.params)) {
    if (role == "kernel") return {c->c_out, c->c_in, c->k_h, c->k_w};
    if (role == "bias") return {c->c_out};
  } else if (const auto* d = std::get_if<DenseParams>(&s.params)) {
    if (role == "kernel") return {d->out_dim, d->in_dim};
    if (role == "bias") return {d->out_dim};
  }
  throw GraphError(s.id, "stage kind " + std::string(to_string(s.kind)) + " has no '" + role + "' weight");
}

std::vector<Shape3> infer_shapes(const ModelGraph& g) {
  if (g.stages.empty()) throw GraphError(-1, "model '" + g.name + "' has no stages");
  if (g.input_shape.volume() == 0) throw GraphError(-1, "input_shape must be positive");
  if (g.output_stage < 0 || static_cast<std::size_t>(g.output_stage) >= g.stages.size()) {
    throw GraphError(-1, "output_stage " + std::to_string(g.output_stage) + " is not a stage id");
  }

  std::vector<Shape3> shapes;
  shapes.reserve(g.stages.size());
  for (std::size_t idx = 0; idx < g.stages.size(); ++idx) {
    const StageSpec& s = g.stages[idx];
    const int id = s.id;
    if (id != static_cast<int>(idx)) {
      throw GraphError(id, "stage ids must be 0..N-1 in topological order (found at position " + std::to_string(idx) + ")");
    }
    std::vector<Shape3> in;
    for (int p : s.inputs) {
      if (p < 0 || p >= id) throw GraphError(id, "input " + std::to_string(p) + " is not an earlier stage");
      in.push_back(shapes[static_cast<std::size_t>(p)]);
    }
    if (in.empty()) in.push_back(g.input_shape);

    const bool multi_input = s.kind == StageKind::add || s.kind == StageKind::concat_channels;
    if (multi_input && s.inputs.size() < 2) throw GraphError(id, std::string(to_string(s.kind)) + " needs at least two inputs");
    if (!multi_input && s.kind != StageKind::opaque && in.size() != 1) {
      throw GraphError(id, std::string(to_string(s.kind)) + " takes exactly one input");
    }

    const Shape3 x = in.front();
    Shape3 out;
    switch (s.kind) {
      case StageKind::conv2d: {
        const auto& c = std::get<ConvParams>(s.params);
        if (x.c != c.c_in) {
          throw GraphError(id, "conv expects " + std::to_string(c.c_in) + " input channels, producer gives " + std::to_string(x.c));
        }
        out = {c.c_out, window_extent(x.h, c.pad, c.k_h, c.stride, id), window_extent(x.w, c.pad, c.k_w, c.stride, id)};
        break;
      }
      case StageKind::relu:
        out = x;
        break;
      case StageKind::maxpool2d:
      case StageKind::avgpool2d: {
        const auto& p = std::get<PoolParams>(s.params);
        out = {x.c, window_extent(x.h, 0, p.window, p.stride, id), window_extent(x.w, 0, p.window, p.stride, id)};
        break;
      }
      case StageKind::global_avg_pool:
        out = {x.c, 1, 1};
        break;
      case StageKind::dense: {
        const auto& d = std::get<DenseParams>(s.params);
        if (x.volume() != d.in_dim) {
          throw GraphError(id, "dense expects in_dim " + std::to_string(d.in_dim) + ", producer gives " + std::to_string(x.volume()));
        }
        out = {d.out_dim, 1, 1};
        break;
      }
      case StageKind::add:
        for (const auto& other : in) {
          if (other != x) throw GraphError(id, "add inputs differ in shape: " + to_string(x) + " vs " + to_string(other));
        }
        out = x;
        break;
      case StageKind::concat_channels:
        out = {0, x.h, x.w};
        for (const auto& other : in) {
          if (other.h != x.h || other.w != x.w) {
            throw GraphError(id, "concat inputs differ in resolution: " + to_string(x) + " vs " + to_string(other));
          }
          out.c += other.c;
        }
        break;
      case StageKind::opaque:
        out = s.out_shape;
        if (out.volume() == 0) throw GraphError(id, "opaque stage needs a positive out_shape");
        break;
    }
    if (out != s.out_shape) {
      throw GraphError(id, "declared out_shape " + to_string(s.out_shape) + " but computed " + to_string(out));
    }
    shapes.push_back(out);
  }
  return shapes;
}

ModelGraph parse_manifest(std::string_view text, const fs::path& base_dir) {
  ModelGraph g;
  g.base_dir = base_dir;
  try {
    const json j = json::parse(text);
    g.name = j.at("name").get<std::string>();
    g.input_shape = shape3_from_json(j.at("input_shape"));
    g.output_stage = j.at("output_stage").get<int>();
    for (const auto& js : j.at("stages")) {
      StageSpec s;
      s.id = js.at("id").get<int>();
      s.name = js.value("name", "stage" + std::to_string(s.id));
      s.kind = parse_stage_kind(js.at("kind").get<std::string>());
      s.params = params_from_json(s.kind, js.value("params", json::object()), s.id);
      s.inputs = js.value("inputs", std::vector<int>{});
      s.out_shape = shape3_from_json(js.at("out_shape"));
      if (js.contains("weights") && !js.at("weights").is_null()) {
        for (const auto& [role, path] : js.at("weights").items()) {
          if (!path.is_null()) s.weights[role] = path.get<std::string>();
        }
      }
      g.stages.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest JSON: ") + e.what());
  }
  infer_shapes(g);
  for (const auto& s : g.stages) {
    const bool has_weights = s.kind == StageKind::conv2d || s.kind == StageKind::dense;
    if (has_weights && !s.weights.count("kernel")) throw GraphError(s.id, "missing 'kernel' weight file");
    for (const auto& [role, path] : s.weights) {
      if (!has_weights) throw GraphError(s.id, std::string(to_string(s.kind)) + " stage cannot carry weights");
      expected_weight_shape(s, role);
    }
  }
  return g;
}

ModelGraph load_manifest(const fs::path& path) {
  ModelGraph g = parse_manifest(read_file(path), path.parent_path());
  for (const auto& s : g.stages) {
    for (const auto& [role, rel] : s.weights) {
      const fs::path file = g.base_dir / rel;
      if (!fs::exists(file)) throw IoError("stage " + std::to_string(s.id) + ": missing weight file " + file.string());
      const Shape actual = read_npy_shape(file);
      const Shape expected = expected_weight_shape(s, role);
      if (actual != expected) {
        throw GraphError(s.id, role + " file " + file.string() + " has shape " + to_string(actual) + ", expected " +
                                   to_string(expected));
      }
    }
  }
  return g;
}

std::string manifest_to_json(const ModelGraph& g) {
  nlohmann::ordered_json j;
  j["name"] = g.name;
  j["input_shape"] = shape3_to_json(g.input_shape);
  j["output_stage"] = g.output_stage;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : g.stages) {
    nlohmann::ordered_json js;
    js["id"] = s.id;
    js["name"] = s.name;
    js["kind"] = std::string(to_string(s.kind));
    js["params"] = params_to_json(s.params);
    js["inputs"] = s.inputs;
    js["out_shape"] = shape3_to_json(s.out_shape);
    if (!s.weights.empty()) {
      nlohmann::ordered_json w;
      for (const auto& [role, path] : s.weights) w[role] = path;
      js["weights"] = std::move(w);
    }
    stages.push_back(std::move(js));
  }
  j["stages"] = std::move(stages);
  return j.dump(2) + "\n";
}

void save_manifest(const ModelGraph& g, const fs::path& path) {
  write_file_atomic(path, manifest_to_json(g));
}

std::string CutCheck::diagnostic() const {
  if (valid) return "valid";
  std::string out = "skip edges cross the cut:";
  for (const auto& [from, to] : crossing_edges) {
    out += " (" + (from == kModelInput ? std::string("input") : std::to_string(from)) + " -> " + std::to_string(to) + ")";
  }
  return out;
}

CutCheck valid_cut(const ModelGraph& g, int target_stage) {
  g.stage(target_stage);
  CutCheck check;
  for (std::size_t u = static_cast<std::size_t>(target_stage) + 1; u < g.stages.size(); ++u) {
    const auto& s = g.stages[u];
    if (s.inputs.empty()) {
      check.crossing_edges.emplace_back(kModelInput, s.id);
      continue;
    }
    for (int p : s.inputs) {
      if (p < target_stage) check.crossing_edges.emplace_back(p, s.id);
    }
  }
  check.valid = check.crossing_edges.empty();
  return check;
}

}  // namespace repshare
