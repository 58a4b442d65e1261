#include "repshare/cka.hpp"

#include "repshare/io.hpp"

#include <json.hpp>

#include <limits>

namespace repshare {

GramMatrix center_gram(const GramMatrix& k) {
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand_mean = k.mean();
  GramMatrix centered = k;
  centered.colwise() -= row_mean;
  centered.rowwise() -= col_mean;
  centered.array() += grand_mean;
  // Rows that are identical up to rounding leave only cancellation residue.
  if (centered.squaredNorm() <= 1e-24 * k.squaredNorm()) centered.setZero();
  return centered;
}

double hsic_biased(const GramMatrix& k_centered, const GramMatrix& l_centered) {
  const double n = static_cast<double>(k_centered.rows());
  return (k_centered.array() * l_centered.array()).sum() / ((n - 1.0) * (n - 1.0));
}

double cka_centered(const GramMatrix& k_centered, const GramMatrix& l_centered) {
  if (k_centered.rows() != l_centered.rows()) {
    throw ShapeError("Gram matrices have different example counts: n = " + std::to_string(k_centered.rows()) +
                     " vs n = " + std::to_string(l_centered.rows()));
  }
  const double kl = (k_centered.array() * l_centered.array()).sum();
  const double kk = k_centered.squaredNorm();
  const double ll = l_centered.squaredNorm();
  if (!(kk > 0.0) || !(ll > 0.0)) {
    throw UndefinedSimilarity("a representation has zero variance across examples");
  }
  const double s = kl / std::sqrt(kk * ll);
  if (!std::isfinite(s)) throw UndefinedSimilarity("non-finite similarity");
  return std::clamp(s, 0.0, 1.0);
}

double cka(const Tensor& x, const Tensor& y) {
  if (x.rank() == 0 || y.rank() == 0) throw ShapeError("cka needs batched inputs of rank >= 1");
  return cka(x.rows(), y.rows());
}

SimilarityMode parse_similarity_mode(std::string_view text) {
  if (text == "same" || text == "same-stage") return SimilarityMode::same_stage;
  if (text == "cross" || text == "cross-stage") return SimilarityMode::cross_stage;
  throw ValidationError("unknown similarity mode '" + std::string(text) + "' (expected same or cross)");
}

std::string_view to_string(SimilarityMode mode) {
  return mode == SimilarityMode::same_stage ? "same" : "cross";
}

bool SimilarityMatrix::has(int stage_a, int stage_b) const {
  auto ia = std::find(stages_a.begin(), stages_a.end(), stage_a);
  auto ib = std::find(stages_b.begin(), stages_b.end(), stage_b);
  if (ia == stages_a.end() || ib == stages_b.end()) return false;
  return !std::isnan(values(ia - stages_a.begin(), ib - stages_b.begin()));
}

double SimilarityMatrix::at(int stage_a, int stage_b) const {
  if (!has(stage_a, stage_b)) {
    throw PlanError("no similarity entry for (" + std::to_string(stage_a) + ", " + std::to_string(stage_b) + ")");
  }
  auto ia = std::find(stages_a.begin(), stages_a.end(), stage_a) - stages_a.begin();
  auto ib = std::find(stages_b.begin(), stages_b.end(), stage_b) - stages_b.begin();
  return values(ia, ib);
}

SimilarityMatrix similarity_matrix(const RepresentationSet& a, const RepresentationSet& b, SimilarityMode mode) {
  if (a.empty() || b.empty()) throw ShapeError("similarity needs non-empty representation sets");
  if (a.n() != b.n()) {
    throw ShapeError("representation sets come from different batches: n = " + std::to_string(a.n()) +
                     " vs n = " + std::to_string(b.n()));
  }
  SimilarityMatrix sim;
  sim.stages_a = a.stage_ids();
  sim.stages_b = b.stage_ids();
  if (mode == SimilarityMode::same_stage && sim.stages_a.size() != sim.stages_b.size()) {
    throw ShapeError("same-stage mode needs equal stage counts, got " + std::to_string(sim.stages_a.size()) +
                     " and " + std::to_string(sim.stages_b.size()));
  }

  auto centered_grams = [](const RepresentationSet& set, const std::vector<int>& ids) {
    std::vector<GramMatrix> grams;
    grams.reserve(ids.size());
    for (int id : ids) grams.push_back(center_gram(gram_linear(set.at(id).rows())));
    return grams;
  };
  const auto grams_a = centered_grams(a, sim.stages_a);
  const auto grams_b = centered_grams(b, sim.stages_b);

  const auto rows = static_cast<Eigen::Index>(sim.stages_a.size());
  const auto cols = static_cast<Eigen::Index>(sim.stages_b.size());
  sim.values = Eigen::MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());

  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (mode == SimilarityMode::cross_stage || i == j) cells.emplace_back(i, j);
    }
  }
  parallel_for(cells.size(), [&](std::size_t c) {
    const auto [i, j] = cells[c];
    sim.values(i, j) = cka_centered(grams_a[static_cast<std::size_t>(i)], grams_b[static_cast<std::size_t>(j)]);
  });
  return sim;
}

std::string similarity_to_json(const SimilarityMatrix& sim) {
  nlohmann::ordered_json j;
  j["stages_a"] = sim.stages_a;
  j["stages_b"] = sim.stages_b;
  auto values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < sim.values.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < sim.values.cols(); ++k) {
      const double v = sim.values(i, k);
      row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    }
    values.push_back(std::move(row));
  }
  j["values"] = std::move(values);
  return j.dump(2) + "\n";
}

SimilarityMatrix similarity_from_json(std::string_view text) {
  SimilarityMatrix sim;
  try {
    const auto j = nlohmann::json::parse(text);
    sim.stages_a = j.at("stages_a").get<std::vector<int>>();
    sim.stages_b = j.at("stages_b").get<std::vector<int>>();
    const auto& values = j.at("values");
    if (values.size() != sim.stages_a.size()) throw FormatError("values has wrong row count");
    sim.values.resize(static_cast<Eigen::Index>(sim.stages_a.size()), static_cast<Eigen::Index>(sim.stages_b.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != sim.stages_b.size()) throw FormatError("values row " + std::to_string(i) + " has wrong length");
      for (std::size_t k = 0; k < values[i].size(); ++k) {
        const auto& cell = values[i][k];
        sim.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            cell.is_null() ? std::numeric_limits<double>::quiet_NaN() : cell.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("similarity JSON: ") + e.what());
  }
  return sim;
}

std::string similarity_to_csv(const SimilarityMatrix& sim) {
  std::string out;
  for (int id : sim.stages_b) out += "," + std::to_string(id);
  out += "\n";
  for (std::size_t i = 0; i < sim.stages_a.size(); ++i) {
    out += std::to_string(sim.stages_a[i]);
    for (std::size_t k = 0; k < sim.stages_b.size(); ++k) {
      const double v = sim.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      out += ",";
      if (!std::isnan(v)) out += format_number(v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace repshare
