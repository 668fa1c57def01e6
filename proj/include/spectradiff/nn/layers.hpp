#pragma once

#include "spectradiff/nn/ops.hpp"
#include "spectradiff/nn/tensor.hpp"

#include <functional>
#include <map>
#include <random>
#include <string>

namespace spectradiff::nn {

using Rng = std::mt19937_64;

struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}
};

/// Non-owning registry of a model's parameters keyed by path
/// (e.g. "encoder.conv1.weight"). Rebuilt from the model whenever needed.
class ParamStore {
 public:
  void add(const std::string& path, Parameter& p);

  Parameter& at(const std::string& path) const;
  bool contains(const std::string& path) const { return params_.count(path) != 0; }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  void zero_grad() const;
  Index scalar_count() const;

 private:
  std::map<std::string, Parameter*> params_;
};

std::string join_path(const std::string& prefix, const std::string& name);

/// Normal(0, sqrt(2 / fan_in)) initializer.
Tensor he_normal(Tensor::Shape shape, Index fan_in, Rng& rng);
Tensor uniform_tensor(Tensor::Shape shape, Real bound, Rng& rng);

// Each layer caches what its backward pass needs during forward. Backward
// accumulates parameter gradients and returns the gradient of its input.

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Index in_channels, Index out_channels, Index kernel_h, Index kernel_w, ConvParams p,
         Rng& rng);
  Conv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding, Rng& rng)
      : Conv2d(in_channels, out_channels, kernel, kernel, ConvParams::square(stride, padding), rng) {}

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamStore& store, const std::string& prefix);

  Parameter weight;  // [out, in, kh, kw]
  Parameter bias;    // [out]
  ConvParams params;

 private:
  Tensor input_;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding,
                  Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamStore& store, const std::string& prefix);

  Parameter weight;  // [in, out, k, k]
  Parameter bias;    // [out]
  ConvParams params;

 private:
  Tensor input_;
};

class Linear {
 public:
  Linear() = default;
  Linear(Index in_features, Index out_features, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamStore& store, const std::string& prefix);

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]

 private:
  Tensor input_;
};

class GroupNorm {
 public:
  GroupNorm() = default;
  GroupNorm(Index channels, Index preferred_groups = 8, Real eps = 1e-5);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamStore& store, const std::string& prefix);

  Parameter gamma;
  Parameter beta;
  Index groups = 1;
  Real eps = 1e-5;

 private:
  GroupNormCache cache_;
};

enum class ActivationKind { ReLU, SiLU, Sigmoid };

class Activation {
 public:
  explicit Activation(ActivationKind kind = ActivationKind::ReLU) : kind_(kind) {}

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  ActivationKind kind_;
  Tensor cached_;  // input for ReLU/SiLU, output for Sigmoid
};

/// Learned lookup table for integer labels: [count, dim].
class Embedding {
 public:
  Embedding() = default;
  Embedding(Index count, Index dim, Rng& rng, Real bound = 0.1);

  Tensor forward(std::span<const int> ids);
  void backward(const Tensor& grad_out);
  void collect(ParamStore& store, const std::string& prefix);

  Index count() const { return table.value.dim(0); }
  Parameter table;

 private:
  std::vector<int> ids_;
};

}  // namespace spectradiff::nn
