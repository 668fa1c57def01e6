#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <string>
#include <vector>

namespace spectradiff::nn {

using Real = double;
using Index = Eigen::Index;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major N-d array. Image batches use [N, C, H, W].
class Tensor {
 public:
  using Shape = std::vector<Index>;

  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);
  Tensor(Shape shape, Vector data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  Index size() const { return data_.size(); }

  Vector& flat() { return data_; }
  const Vector& flat() const { return data_; }
  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }

  Real& operator[](Index i) { return data_[i]; }
  Real operator[](Index i) const { return data_[i]; }

  Real& at(Index n, Index c, Index h, Index w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Real at(Index n, Index c, Index h, Index w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Same data viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  /// Rows [begin, begin + count) along axis 0.
  Tensor slice(Index begin, Index count) const;

  /// 2-d view for rank-2 tensors (row-major).
  Eigen::Map<RowMatrix> matrix();
  Eigen::Map<const RowMatrix> matrix() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  Vector data_;
};

std::string shape_string(const Tensor::Shape& shape);
Index shape_product(const Tensor::Shape& shape);

/// Concatenates along axis 0.
Tensor stack(const std::vector<Tensor>& items);

/// Channel concatenation of two [N, C, H, W] tensors.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a channel-concatenated gradient back into its two parts.
void split_channels(const Tensor& g, Index channels_a, Tensor& ga, Tensor& gb);

}  // namespace spectradiff::nn
