#include "repshare/tensor.hpp"

#include "repshare/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace repshare {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

std::string to_string(const Shape3& shape) {
  return to_string(Shape{shape.c, shape.h, shape.w});
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(element_count(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + to_string(shape_));
  }
}

float Tensor::at(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw ShapeError("index rank does not match tensor rank");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) throw ShapeError("index out of range on axis " + std::to_string(i));
    offset = offset * shape_[i] + index[i];
  }
  return data_[offset];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

Eigen::Map<const RowMatrixXf> Tensor::rows() const {
  const auto n = shape_.empty() ? std::size_t{0} : shape_[0];
  const auto p = n == 0 ? std::size_t{0} : data_.size() / n;
  return {data_.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)};
}

Eigen::Map<RowMatrixXf> Tensor::rows() {
  const auto n = shape_.empty() ? std::size_t{0} : shape_[0];
  const auto p = n == 0 ? std::size_t{0} : data_.size() / n;
  return {data_.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)};
}

Shape3 Tensor::feature_shape() const {
  if (rank() != 4) throw ShapeError("expected a rank-4 (n, C, H, W) tensor, got " + to_string(shape_));
  return {shape_[1], shape_[2], shape_[3]};
}

Tensor flatten(const Tensor& t) {
  return t.reshaped({t.size()});
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

Tensor as_representation(Tensor t) {
  if (t.rank() == 0) throw ShapeError("scalar cannot be a representation");
  if (t.rank() == 4) return t;
  if (t.rank() > 4) throw ShapeError("representation rank " + std::to_string(t.rank()) + " exceeds 4");
  const auto n = t.dim(0);
  const auto c = n == 0 ? std::size_t{0} : t.size() / n;
  return t.reshaped({n, c, 1, 1});
}

void RepresentationSet::add(int stage_id, Tensor rep) {
  rep = as_representation(std::move(rep));
  const auto n = rep.dim(0);
  if (n < 2) throw DegenerateInput("representation for stage " + std::to_string(stage_id) + " has n = " +
                                   std::to_string(n) + " (need n >= 2)");
  if (!stages_.empty() && n != n_) {
    throw ShapeError("stage " + std::to_string(stage_id) + " has n = " + std::to_string(n) +
                     " but the set has n = " + std::to_string(n_));
  }
  n_ = n;
  stages_.insert_or_assign(stage_id, std::move(rep));
}

const Tensor& RepresentationSet::at(int stage_id) const {
  auto it = stages_.find(stage_id);
  if (it == stages_.end()) throw ShapeError("no representation for stage " + std::to_string(stage_id));
  return it->second;
}

std::vector<int> RepresentationSet::stage_ids() const {
  std::vector<int> ids;
  ids.reserve(stages_.size());
  for (const auto& [id, rep] : stages_) ids.push_back(id);
  return ids;
}

}  // namespace repshare
