#pragma once

// Linear centered kernel alignment between two representation batches.
//
//   K = X X^T,  L = Y Y^T,  K' = H K H,  L' = H L H,  H = I - J/n
//   CKA = HSIC(K, L) / sqrt(HSIC(K, K) * HSIC(L, L)),  HSIC(K, L) = tr(K' L') / (n - 1)^2
//
// The (n - 1)^2 normalisation cancels in the ratio, so only the traces are
// formed. X and Y must share the example count n but may have any feature
// widths p and q.

#include "repshare/error.hpp"
#include "repshare/parallel.hpp"
#include "repshare/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace repshare {

using GramMatrix = Eigen::MatrixXd;

/// K(i, j) = <row_i, row_j>, accumulated in double sequentially over the
/// feature index so the result is reproducible bit-for-bit.
template <typename Derived>
GramMatrix gram_linear(const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2) throw DegenerateInput("Gram matrix needs n >= 2 examples, got " + std::to_string(n));
  const RowMatrixXd xd = x.template cast<double>();
  GramMatrix k(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    const double* xi = xd.data() + i * p;
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double* xj = xd.data() + j * p;
      double acc = 0.0;
      for (Eigen::Index f = 0; f < p; ++f) acc += xi[f] * xj[f];
      k(i, j) = acc;
    }
  });
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) k(i, j) = k(j, i);
  }
  return k;
}

/// H K H without forming H: subtract row and column means, add back the grand mean.
/// A result that is pure rounding residue (relative squared norm <= 1e-24) is snapped to zero.
GramMatrix center_gram(const GramMatrix& k);

/// Biased HSIC estimator tr(K' L') / (n - 1)^2 on already centered Grams.
double hsic_biased(const GramMatrix& k_centered, const GramMatrix& l_centered);

/// CKA from centered Gram matrices. Throws UndefinedSimilarity when either
/// centered Gram vanishes (e.g. all rows identical). Result clamped to [0, 1].
double cka_centered(const GramMatrix& k_centered, const GramMatrix& l_centered);

template <typename DerivedX, typename DerivedY>
double cka(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.rows() != y.rows()) {
    throw ShapeError("cka inputs have different example counts: n = " + std::to_string(x.rows()) + " vs n = " +
                     std::to_string(y.rows()));
  }
  return cka_centered(center_gram(gram_linear(x)), center_gram(gram_linear(y)));
}

/// CKA of two batches whose per-example blocks are flattened row-major.
double cka(const Tensor& x, const Tensor& y);

enum class SimilarityMode { same_stage, cross_stage };

SimilarityMode parse_similarity_mode(std::string_view text);
std::string_view to_string(SimilarityMode mode);

/// |stages_a| x |stages_b| grid of CKA scores. Entries that were not computed
/// (off-diagonal cells in same-stage mode) hold NaN.
struct SimilarityMatrix {
  std::vector<int> stages_a;
  std::vector<int> stages_b;
  Eigen::MatrixXd values;

  bool has(int stage_a, int stage_b) const;
  /// Throws PlanError when the pair is absent or was not computed.
  double at(int stage_a, int stage_b) const;
};

/// Same-stage mode pairs the i-th stage of `a` with the i-th stage of `b`
/// (ShapeError on unequal stage counts); cross-stage fills the full grid.
SimilarityMatrix similarity_matrix(const RepresentationSet& a, const RepresentationSet& b, SimilarityMode mode);

/// {"stages_a": [...], "stages_b": [...], "values": [[...], ...]}; uncomputed cells are null.
std::string similarity_to_json(const SimilarityMatrix& sim);
SimilarityMatrix similarity_from_json(std::string_view text);
/// Header row lists stages_b after an empty corner cell; first column lists stages_a.
std::string similarity_to_csv(const SimilarityMatrix& sim);

}  // namespace repshare
