#include "spectradiff/nn/layers.hpp"

#include "spectradiff/errors.hpp"

#include <cmath>

namespace spectradiff::nn {

void ParamStore::add(const std::string& path, Parameter& p) {
  if (!p.value.same_shape(p.grad)) {
    throw ShapeError("parameter " + path + ": gradient shape differs from value shape");
  }
  if (!params_.emplace(path, &p).second) {
    throw ArgumentError("duplicate parameter path " + path);
  }
}

Parameter& ParamStore::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw ArgumentError("unknown parameter path " + path);
  return *it->second;
}

void ParamStore::zero_grad() const {
  for (auto& [_, p] : params_) p->grad.flat().setZero();
}

Index ParamStore::scalar_count() const {
  Index n = 0;
  for (const auto& [_, p] : params_) n += p->value.size();
  return n;
}

std::string join_path(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

Tensor he_normal(Tensor::Shape shape, Index fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<Real> normal(0.0, std::sqrt(2.0 / Real(std::max<Index>(fan_in, 1))));
  for (Index i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

Tensor uniform_tensor(Tensor::Shape shape, Real bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<Real> uniform(-bound, bound);
  for (Index i = 0; i < t.size(); ++i) t[i] = uniform(rng);
  return t;
}

// Conv2d ----------------------------------------------------------------------

Conv2d::Conv2d(Index in_channels, Index out_channels, Index kernel_h, Index kernel_w, ConvParams p,
               Rng& rng)
    : weight(he_normal({out_channels, in_channels, kernel_h, kernel_w},
                       in_channels * kernel_h * kernel_w, rng)),
      bias(Tensor({out_channels})),
      params(p) {}

Tensor Conv2d::forward(const Tensor& x) {
  input_ = x;
  Tensor y = conv2d(x, weight.value, params);
  add_channel_bias(y, bias.value);
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  weight.grad.flat() += conv2d_grad_kernel(input_, grad_out, params, weight.value.dim(2),
                                           weight.value.dim(3)).flat();
  bias.grad.flat() += channel_sums(grad_out).flat();
  return conv2d_grad_input(grad_out, weight.value, params, input_.shape());
}

void Conv2d::collect(ParamStore& store, const std::string& prefix) {
  store.add(join_path(prefix, "weight"), weight);
  store.add(join_path(prefix, "bias"), bias);
}

// ConvTranspose2d ---------------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(Index in_channels, Index out_channels, Index kernel, Index stride,
                                 Index padding, Rng& rng)
    : weight(he_normal({in_channels, out_channels, kernel, kernel},
                       in_channels * kernel * kernel / (stride * stride), rng)),
      bias(Tensor({out_channels})),
      params(ConvParams::square(stride, padding)) {}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  input_ = x;
  Tensor y = transposed_conv2d(x, weight.value, params);
  add_channel_bias(y, bias.value);
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
  weight.grad.flat() += transposed_conv2d_grad_kernel(input_, grad_out, params,
                                                      weight.value.dim(2), weight.value.dim(3))
                            .flat();
  bias.grad.flat() += channel_sums(grad_out).flat();
  return conv2d(grad_out, weight.value, params);
}

void ConvTranspose2d::collect(ParamStore& store, const std::string& prefix) {
  store.add(join_path(prefix, "weight"), weight);
  store.add(join_path(prefix, "bias"), bias);
}

// Linear ------------------------------------------------------------------------

Linear::Linear(Index in_features, Index out_features, Rng& rng)
    : weight(he_normal({out_features, in_features}, in_features, rng)),
      bias(Tensor({out_features})) {}

Tensor Linear::forward(const Tensor& x) {
  input_ = x;
  return linear(x, weight.value, bias.value);
}

Tensor Linear::backward(const Tensor& grad_out) {
  weight.grad.matrix().noalias() += grad_out.matrix().transpose() * input_.matrix();
  bias.grad.flat() += grad_out.matrix().colwise().sum().transpose();
  Tensor dx(input_.shape());
  dx.matrix().noalias() = grad_out.matrix() * weight.value.matrix();
  return dx;
}

void Linear::collect(ParamStore& store, const std::string& prefix) {
  store.add(join_path(prefix, "weight"), weight);
  store.add(join_path(prefix, "bias"), bias);
}

// GroupNorm ---------------------------------------------------------------------

GroupNorm::GroupNorm(Index channels, Index preferred_groups, Real eps_)
    : gamma(Tensor({channels}, 1.0)),
      beta(Tensor({channels})),
      groups(group_count_for(channels, preferred_groups)),
      eps(eps_) {}

Tensor GroupNorm::forward(const Tensor& x) {
  return group_norm(x, gamma.value, beta.value, groups, eps, &cache_);
}

Tensor GroupNorm::backward(const Tensor& grad_out) {
  return group_norm_backward(cache_, gamma.value, grad_out, gamma.grad, beta.grad);
}

void GroupNorm::collect(ParamStore& store, const std::string& prefix) {
  store.add(join_path(prefix, "gamma"), gamma);
  store.add(join_path(prefix, "beta"), beta);
}

// Activation --------------------------------------------------------------------

Tensor Activation::forward(const Tensor& x) {
  switch (kind_) {
    case ActivationKind::ReLU:
      cached_ = x;
      return relu(x);
    case ActivationKind::SiLU:
      cached_ = x;
      return silu(x);
    case ActivationKind::Sigmoid:
      cached_ = sigmoid(x);
      return cached_;
  }
  return x;
}

Tensor Activation::backward(const Tensor& grad_out) {
  switch (kind_) {
    case ActivationKind::ReLU:
      return relu_backward(cached_, grad_out);
    case ActivationKind::SiLU:
      return silu_backward(cached_, grad_out);
    case ActivationKind::Sigmoid:
      return sigmoid_backward(cached_, grad_out);
  }
  return grad_out;
}

// Embedding ---------------------------------------------------------------------

Embedding::Embedding(Index count, Index dim, Rng& rng, Real bound)
    : table(uniform_tensor({count, dim}, bound, rng)) {}

Tensor Embedding::forward(std::span<const int> ids) {
  const Index dim = table.value.dim(1);
  ids_.assign(ids.begin(), ids.end());
  Tensor out({static_cast<Index>(ids.size()), dim});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= count()) {
      throw ArgumentError("embedding: id " + std::to_string(ids[i]) + " outside [0, " +
                          std::to_string(count()) + ")");
    }
    out.matrix().row(static_cast<Index>(i)) = table.value.matrix().row(ids[i]);
  }
  return out;
}

void Embedding::backward(const Tensor& grad_out) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    table.grad.matrix().row(ids_[i]) += grad_out.matrix().row(static_cast<Index>(i));
  }
}

void Embedding::collect(ParamStore& store, const std::string& prefix) {
  store.add(join_path(prefix, "table"), table);
}

}  // namespace spectradiff::nn
