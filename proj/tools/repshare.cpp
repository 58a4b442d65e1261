#include "repshare/cka.hpp"
#include "repshare/error.hpp"
#include "repshare/executor.hpp"
#include "repshare/experiment.hpp"
#include "repshare/io.hpp"
#include "repshare/metrics.hpp"
#include "repshare/model_graph.hpp"
#include "repshare/npy.hpp"
#include "repshare/parallel.hpp"
#include "repshare/planner.hpp"
#include "repshare/toy.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace repshare;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("repshare");
  logger->set_pattern("repshare: %l: %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("REPSHARE_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::err);
    if (level != "error") spdlog::warn("unknown REPSHARE_LOG value '{}'", level);
  }
}

struct Options {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  fs::path out = ".";
  std::string mode = "same";
  std::optional<double> min_similarity;
  std::optional<std::uint64_t> budget;
  std::string inject;
  std::size_t batch = kDefaultBatch;
  fs::path inputs;
  fs::path estimator;
  int stage = kDefaultNoiseStage;
  std::vector<std::string> positional;
};

fs::path emit(const fs::path& path, const std::string& bytes) {
  write_file_atomic(path, bytes);
  spdlog::info("wrote {}", path.string());
  return path;
}

SimilarityMode mode_of(const Options& o) {
  try {
    return parse_similarity_mode(o.mode);
  } catch (const ValidationError&) {
    throw UsageError("--mode must be 'same' or 'cross', got '" + o.mode + "'");
  }
}

Tensor require_inputs(const Options& o) {
  if (o.inputs.empty()) throw UsageError("--inputs <npy> is required");
  return read_tensor(o.inputs);
}

// Parses "stage=<t>,rep=<path>".
std::pair<int, fs::path> parse_inject(const std::string& text) {
  std::optional<int> stage;
  std::optional<fs::path> rep;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--inject item '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "stage") {
      try {
        std::size_t used = 0;
        stage = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::logic_error&) {
        throw UsageError("--inject stage '" + value + "' is not an integer");
      }
    } else if (key == "rep") {
      rep = value;
    } else {
      throw UsageError("--inject has unknown key '" + key + "'");
    }
    pos = comma + 1;
  }
  if (!stage || !rep) throw UsageError("--inject needs stage=<t>,rep=<path>");
  return {*stage, *rep};
}

int cmd_gen_toy(const Options& o) {
  const ToyPair pair = gen_toy_pair(o.seed, o.batch);
  write_toy_pair(pair, o.out);
  spdlog::info("toy pair for seed {} written to {}", o.seed, o.out.string());
  return 0;
}

int cmd_dump(const Options& o) {
  const ModelGraph g = load_manifest(o.positional.at(0));
  WeightStore weights;
  const ForwardResult r = forward(g, weights, require_inputs(o));
  const fs::path index = write_dumps({g.name, r.dumps}, o.out);
  write_tensor(r.predictions, o.out / g.name / "predictions.npy");
  spdlog::info("wrote {}", index.string());
  return 0;
}

int cmd_cka(const Options& o) {
  const DumpSet a = read_dumps(o.positional.at(0));
  const DumpSet b = read_dumps(o.positional.at(1));
  const SimilarityMatrix sim = similarity_matrix(a.reps, b.reps, mode_of(o));
  emit(o.out / "similarity.json", similarity_to_json(sim));
  emit(o.out / "similarity.csv", similarity_to_csv(sim));
  return 0;
}

int cmd_exec(const Options& o) {
  if (o.inject.empty()) throw UsageError("exec needs --inject stage=<t>,rep=<path>");
  const auto [stage, rep] = parse_inject(o.inject);
  const ModelGraph g = load_manifest(o.positional.at(0));
  WeightStore weights;
  const Tensor merged = forward_merged(g, weights, make_injection(g, stage, read_tensor(rep)));
  write_tensor(merged, o.out / "predictions.npy");
  if (!o.inputs.empty()) {
    WeightStore full;
    const double f = fidelity(merged, forward(g, full, require_inputs(o)).predictions);
    std::cout << "fidelity " << format_number(f) << "\n";
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  const ModelGraph a = load_manifest(o.positional.at(0));
  const ModelGraph b = load_manifest(o.positional.at(1));
  WeightStore wa, wb;
  const SweepResult r = run_sweep(a, wa, b, wb, require_inputs(o), mode_of(o));
  emit(o.out / "sweep.csv", sweep_csv(r.rows));
  emit(o.out / "metrics.csv", correlation_csv(r.metrics));
  emit(o.out / "similarity.json", similarity_to_json(r.similarity));
  return 0;
}

int cmd_noise_sweep(const Options& o) {
  const auto sigmas = default_sigmas();
  emit(o.out / "noise.csv", noise_csv(run_noise_sweep(o.seed, sigmas, o.stage, o.batch)));
  return 0;
}

int cmd_correlate(const Options& o) {
  const auto rows = parse_correlation_csv(read_file(o.positional.at(0)));
  const auto report = correlate_table(rows);
  const std::string json = correlation_report_json(report);
  emit(o.out / "correlation.json", json);
  std::cout << json;
  return 0;
}

int cmd_fit(const Options& o) {
  const CsvTable table = parse_csv(read_file(o.positional.at(0)));
  const int acc_col = table.column("Acc");
  const auto s = table.numeric_column("S");
  const auto acc = table.numeric_column(acc_col >= 0 ? "Acc" : "fidelity");
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < s.size(); ++i) pairs.emplace_back(s[i], acc[i]);
  const std::string json = estimator_to_json(fit_estimator(pairs));
  emit(o.out / "estimator.json", json);
  std::cout << json;
  return 0;
}

int cmd_plan(const Options& o) {
  if (o.min_similarity && o.budget) throw UsageError("--min-similarity and --budget are mutually exclusive");
  const ModelGraph donor = load_manifest(o.positional.at(0));
  const ModelGraph target = load_manifest(o.positional.at(1));
  const SimilarityMatrix sim = similarity_from_json(read_file(o.positional.at(2)));
  const AccuracyEstimator est = o.estimator.empty() ? AccuracyEstimator{} : estimator_from_json(read_file(o.estimator));
  const SelectMode mode = o.budget ? SelectMode{MaxAccuracy{*o.budget}}
                                   : SelectMode{MaxSavings{o.min_similarity.value_or(kDefaultThreshold)}};
  const auto plans = enumerate_plans(donor, target, sim, est);
  const auto selected = select_plan(plans, mode);
  emit(o.out / "plans.jsonl", plans_to_jsonl(plans));
  const std::string summary = plan_summary_json(plans, mode, selected);
  emit(o.out / "plan.json", summary);
  std::cout << summary;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  Options o;
  CLI::App app{"Representation similarity and sharing toolkit"};
  app.require_subcommand(1);
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--out", o.out, "Output directory")->capture_default_str();

  struct Command {
    const char* name;
    const char* help;
    std::vector<const char*> args;
    int (*run)(const Options&);
  };
  const std::vector<Command> table{
      {"gen-toy", "Write the toy model pair, weights and inputs", {}, cmd_gen_toy},
      {"dump", "Write per-stage representation dumps", {"manifest"}, cmd_dump},
      {"cka", "Similarity matrix between two dump sets", {"dumps_a", "dumps_b"}, cmd_cka},
      {"exec", "Run a model from an injected representation", {"manifest"}, cmd_exec},
      {"sweep", "Share every donor stage into every valid target cut", {"manifest_a", "manifest_b"}, cmd_sweep},
      {"noise-sweep", "Similarity and fidelity under injected noise", {}, cmd_noise_sweep},
      {"correlate", "Rank metrics by correlation with accuracy", {"table_csv"}, cmd_correlate},
      {"fit", "Fit the similarity to accuracy estimator", {"pairs_csv"}, cmd_fit},
      {"plan", "Enumerate and select sharing plans", {"donor_manifest", "target_manifest", "similarity_json"}, cmd_plan},
  };
  std::vector<std::pair<CLI::App*, const Command*>> commands;
  for (const auto& cmd : table) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->fallthrough();
    for (const char* arg : cmd.args) {
      // Positionals are collected in declaration order.
      sub->add_option_function<std::string>(arg, [&o](const std::string& v) { o.positional.push_back(v); }, arg)->required();
    }
    commands.emplace_back(sub, &cmd);
  }
  auto* gen = commands[0].first;
  gen->add_option("--batch", o.batch, "Evaluation batch size")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  for (auto i : {1, 3, 4}) commands[static_cast<std::size_t>(i)].first->add_option("--inputs", o.inputs, "Input batch (.npy)");
  for (auto i : {2, 4}) commands[static_cast<std::size_t>(i)].first->add_option("--mode", o.mode, "same|cross")->capture_default_str();
  commands[3].first->add_option("--inject", o.inject, "stage=<t>,rep=<path>");
  auto* noise = commands[5].first;
  noise->add_option("--stage", o.stage, "Target stage of model B")->capture_default_str();
  noise->add_option("--batch", o.batch, "Evaluation batch size")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  auto* plan = commands[8].first;
  plan->add_option("--min-similarity", o.min_similarity, "Max-savings mode threshold")->check(CLI::Range(0.0, 1.0));
  plan->add_option("--budget", o.budget, "Max-accuracy mode minimum savings in bytes");
  plan->add_option("--estimator", o.estimator, "Estimator JSON from fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    set_thread_count(o.threads);
    for (const auto& [sub, cmd] : commands) {
      if (sub->parsed()) return cmd->run(o);
    }
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "repshare: usage: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "repshare: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "repshare: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "repshare: internal error: " << e.what() << "\n";
    return 1;
  }
}
