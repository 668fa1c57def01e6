#include "spectradiff/nn/tensor.hpp"

#include "spectradiff/errors.hpp"

namespace spectradiff::nn {

Index shape_product(const Tensor::Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Tensor::Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(Vector::Constant(shape_product(shape_), fill)) {}

Tensor::Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::slice(Index begin, Index count) const {
  if (shape_.empty() || begin < 0 || count < 0 || begin + count > shape_[0]) {
    throw ShapeError("slice out of range for " + shape_string(shape_));
  }
  const Index stride = shape_[0] == 0 ? 0 : data_.size() / shape_[0];
  Shape s = shape_;
  s[0] = count;
  return Tensor(std::move(s), data_.segment(begin * stride, count * stride));
}

Eigen::Map<RowMatrix> Tensor::matrix() {
  if (rank() != 2) throw ShapeError("matrix view needs rank 2, got " + shape_string(shape_));
  return {data_.data(), shape_[0], shape_[1]};
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  if (rank() != 2) throw ShapeError("matrix view needs rank 2, got " + shape_string(shape_));
  return {data_.data(), shape_[0], shape_[1]};
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  Tensor::Shape inner = items.front().shape();
  Tensor::Shape shape{static_cast<Index>(items.size())};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  const Index stride = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != inner) {
      throw ShapeError("stack: " + shape_string(items[i].shape()) + " vs " + shape_string(inner));
    }
    out.flat().segment(static_cast<Index>(i) * stride, stride) = items[i].flat();
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
      a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const Index n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Tensor out({n, ca + cb, a.dim(2), a.dim(3)});
  for (Index i = 0; i < n; ++i) {
    out.flat().segment(i * (ca + cb) * hw, ca * hw) = a.flat().segment(i * ca * hw, ca * hw);
    out.flat().segment((i * (ca + cb) + ca) * hw, cb * hw) = b.flat().segment(i * cb * hw, cb * hw);
  }
  return out;
}

void split_channels(const Tensor& g, Index channels_a, Tensor& ga, Tensor& gb) {
  const Index n = g.dim(0), c = g.dim(1), hw = g.dim(2) * g.dim(3);
  const Index cb = c - channels_a;
  ga = Tensor({n, channels_a, g.dim(2), g.dim(3)});
  gb = Tensor({n, cb, g.dim(2), g.dim(3)});
  for (Index i = 0; i < n; ++i) {
    ga.flat().segment(i * channels_a * hw, channels_a * hw) = g.flat().segment(i * c * hw, channels_a * hw);
    gb.flat().segment(i * cb * hw, cb * hw) = g.flat().segment((i * c + channels_a) * hw, cb * hw);
  }
}

}  // namespace spectradiff::nn
