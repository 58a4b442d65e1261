#include "repshare/metrics.hpp"

#include "repshare/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace repshare {

std::vector<StageMetrics> stage_metrics(const ModelGraph& g) {
  std::vector<StageMetrics> out;
  out.reserve(g.size());
  for (const auto& s : g.stages) {
    StageMetrics m;
    m.stage_id = s.id;
    const std::uint64_t elems = s.out_shape.volume();
    m.rep_size_bytes = elems * 4;
    switch (s.kind) {
      case StageKind::conv2d: {
        const auto& c = std::get<ConvParams>(s.params);
        m.flops = 2ull * c.c_in * c.k_h * c.k_w * c.c_out * s.out_shape.h * s.out_shape.w;
        m.param_count = static_cast<std::uint64_t>(c.c_out) * c.c_in * c.k_h * c.k_w + c.c_out;
        break;
      }
      case StageKind::dense: {
        const auto& d = std::get<DenseParams>(s.params);
        m.flops = 2ull * d.in_dim * d.out_dim;
        m.param_count = static_cast<std::uint64_t>(d.in_dim) * d.out_dim + d.out_dim;
        break;
      }
      case StageKind::opaque:
        m.param_count = std::get<OpaqueParams>(s.params).params_count;
        break;
      default:
        m.flops = elems;
        break;
    }
    m.param_bytes = m.param_count * 4;
    out.push_back(m);
  }
  return out;
}

std::uint64_t memory_savings(const ModelGraph& g, int target_stage) {
  g.stage(target_stage);
  std::uint64_t bytes = 0;
  for (const auto& m : stage_metrics(g)) {
    if (m.stage_id <= target_stage) bytes += m.param_bytes;
  }
  return bytes;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  using Vec = Eigen::Map<const Eigen::VectorXd>;
  if (x.size() != y.size()) throw UndefinedCorrelation("samples differ in length");
  return pearson(Vec(x.data(), static_cast<Eigen::Index>(x.size())), Vec(y.data(), static_cast<Eigen::Index>(y.size())));
}

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
};

std::optional<LineFit> least_squares(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (const auto& [x, y] : pts) {
    const double r = y - (fit.slope * x + fit.intercept);
    fit.sse += r * r;
  }
  return fit;
}

}  // namespace

AccuracyEstimator fit_estimator(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 4) throw FitError("need at least 4 (S, accuracy) pairs, got " + std::to_string(pairs.size()));
  std::set<double> candidates{kDefaultThreshold};
  for (const auto& [s, acc] : pairs) {
    if (!(s >= 0.0 && s <= 1.0)) throw FitError("similarity " + format_number(s) + " outside [0, 1]");
    if (!std::isfinite(acc)) throw FitError("non-finite accuracy");
    candidates.insert(s);
  }

  // Errors within this margin count as ties; ties keep the smaller threshold.
  constexpr double kTieTolerance = 1e-15;
  std::optional<AccuracyEstimator> best;
  double best_sse = 0.0;
  for (double threshold : candidates) {
    std::vector<std::pair<double, double>> above;
    double below_sum = 0.0;
    std::size_t below_count = 0;
    for (const auto& p : pairs) {
      if (p.first < threshold) {
        below_sum += p.second;
        ++below_count;
      } else {
        above.push_back(p);
      }
    }
    const auto line = least_squares(above);
    if (!line) continue;
    const double floor_value = below_count ? below_sum / static_cast<double>(below_count) : kDefaultFloor;
    double sse = line->sse;
    for (const auto& [s, acc] : pairs) {
      if (s < threshold) sse += (acc - floor_value) * (acc - floor_value);
    }
    if (!best || sse < best_sse - kTieTolerance) {
      best = AccuracyEstimator{threshold, floor_value, line->slope, line->intercept};
      best_sse = sse;
    }
  }
  if (!best) throw FitError("no threshold leaves two distinct similarities for the linear part");
  return *best;
}

std::string estimator_to_json(const AccuracyEstimator& est) {
  nlohmann::ordered_json j;
  j["threshold"] = est.threshold;
  j["floor_value"] = est.floor_value;
  j["slope"] = est.slope;
  j["intercept"] = est.intercept;
  return j.dump(2) + "\n";
}

AccuracyEstimator estimator_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    AccuracyEstimator est;
    est.threshold = j.at("threshold").get<double>();
    est.floor_value = j.at("floor_value").get<double>();
    est.slope = j.at("slope").get<double>();
    est.intercept = j.at("intercept").get<double>();
    if (!(est.threshold >= 0.0 && est.threshold <= 1.0)) throw FormatError("estimator threshold outside [0, 1]");
    return est;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("estimator JSON: ") + e.what());
  }
}

std::vector<MetricCorrelation> correlate_table(std::span<const CorrelationRow> rows) {
  if (rows.size() < 2) throw UndefinedCorrelation("need at least two rows, got " + std::to_string(rows.size()));
  std::vector<double> acc;
  for (const auto& r : rows) acc.push_back(r.acc);

  const std::pair<const char*, double CorrelationRow::*> columns[] = {
      {"S", &CorrelationRow::similarity},
      {"FLOPs", &CorrelationRow::flops},
      {"Size", &CorrelationRow::size},
      {"Params", &CorrelationRow::params},
  };
  std::vector<MetricCorrelation> report;
  for (const auto& [name, member] : columns) {
    std::vector<double> col;
    for (const auto& r : rows) col.push_back(r.*member);
    MetricCorrelation m{name, std::nullopt};
    try {
      m.abs_r = std::abs(pearson(acc, col));
    } catch (const UndefinedCorrelation&) {
    }
    report.push_back(std::move(m));
  }
  std::stable_sort(report.begin(), report.end(), [](const MetricCorrelation& a, const MetricCorrelation& b) {
    if (a.abs_r.has_value() != b.abs_r.has_value()) return a.abs_r.has_value();
    return a.abs_r.value_or(0.0) > b.abs_r.value_or(0.0);
  });
  return report;
}

std::vector<CorrelationRow> parse_correlation_csv(std::string_view text) {
  const CsvTable table = parse_csv(text);
  const auto acc = table.numeric_column("Acc");
  const auto s = table.numeric_column("S");
  const auto flops = table.numeric_column("FLOPs");
  const auto size = table.numeric_column("Size");
  const auto params = table.numeric_column("Params");
  std::vector<CorrelationRow> rows(acc.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {acc[i], s[i], flops[i], size[i], params[i]};
  return rows;
}

std::string correlation_csv(std::span<const CorrelationRow> rows) {
  std::string out = "Acc,S,FLOPs,Size,Params\n";
  for (const auto& r : rows) {
    out += format_number(r.acc) + "," + format_number(r.similarity) + "," + format_number(r.flops) + "," +
           format_number(r.size) + "," + format_number(r.params) + "\n";
  }
  return out;
}

std::string correlation_report_json(std::span<const MetricCorrelation> report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& m : report) j[m.metric] = m.abs_r ? nlohmann::ordered_json(*m.abs_r) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

}  // namespace repshare
