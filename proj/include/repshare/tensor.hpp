#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace repshare {

using Shape = std::vector<std::size_t>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXf = RowMatrix<float>;
using RowMatrixXd = RowMatrix<double>;

/// Per-example feature-map shape (channels, height, width).
struct Shape3 {
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t volume() const { return c * h * w; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape& shape);
std::string to_string(const Shape3& shape);

/// Dense row-major float32 tensor with an explicit shape.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape);
  /// Throws ShapeError when data.size() != product(shape).
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  /// Element at a full multi-index (row-major).
  float at(std::span<const std::size_t> index) const;
  float at(std::initializer_list<std::size_t> index) const {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }

  bool all_finite() const;

  /// Same data under a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  /// (dim(0), size()/dim(0)) matrix view: one row per leading index.
  Eigen::Map<const RowMatrixXf> rows() const;
  Eigen::Map<RowMatrixXf> rows();

  /// Trailing (C, H, W) of a rank-4 tensor.
  Shape3 feature_shape() const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

std::size_t element_count(const Shape& shape);

/// Rank-1 view of all elements in row-major order.
Tensor flatten(const Tensor& t);

/// Same shape and identical bytes.
bool bit_equal(const Tensor& a, const Tensor& b);

/// Normalizes a representation batch to rank 4: rank < 4 becomes (n, C, 1, 1)
/// where C is the product of the trailing dimensions.
Tensor as_representation(Tensor t);

/// Stage outputs for one evaluation batch, keyed by stage id.
class RepresentationSet {
 public:
  RepresentationSet() = default;

  /// Adds a stage dump; normalizes it to rank 4 and enforces the shared leading n.
  void add(int stage_id, Tensor rep);

  const Tensor& at(int stage_id) const;
  bool contains(int stage_id) const { return stages_.count(stage_id) != 0; }
  std::vector<int> stage_ids() const;
  const std::map<int, Tensor>& stages() const { return stages_; }
  std::size_t n() const { return n_; }
  bool empty() const { return stages_.empty(); }

 private:
  std::map<int, Tensor> stages_;
  std::size_t n_ = 0;
};

}  // namespace repshare
