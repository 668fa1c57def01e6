#pragma once

#include "spectradiff/nn/tensor.hpp"

#include <span>

namespace spectradiff::nn {

/// Stride and zero padding of a 2-d convolution. Kernel extents come from
/// the kernel tensor.
struct ConvParams {
  Index stride_h = 1;
  Index stride_w = 1;
  Index pad_h = 0;
  Index pad_w = 0;

  static ConvParams square(Index stride, Index padding) {
    return {stride, stride, padding, padding};
  }
};

// Convolution ---------------------------------------------------------------
//
// Cross-correlation of x [N, Cin, H, W] with kernels [Cout, Cin, kh, kw]:
// H' = (H + 2 pad - kh) / stride + 1.

Tensor conv2d(const Tensor& x, const Tensor& kernels, const ConvParams& p);
Tensor conv2d(const Tensor& x, const Tensor& kernels, Index stride, Index padding);

/// d<conv2d(x, K), g>/dx for an input of shape `input_shape`.
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernels, const ConvParams& p,
                         const Tensor::Shape& input_shape);
/// d<conv2d(x, K), g>/dK.
Tensor conv2d_grad_kernel(const Tensor& x, const Tensor& grad_out, const ConvParams& p,
                          Index kernel_h, Index kernel_w);

/// Adjoint of conv2d: y [N, A, H, W] with kernels [A, B, kh, kw] gives
/// [N, B, (H-1) s - 2 pad + kh, ...], so <conv2d(x, K), y> = <x, tconv(y, K)>.
Tensor transposed_conv2d(const Tensor& y, const Tensor& kernels, const ConvParams& p);
Tensor transposed_conv2d(const Tensor& y, const Tensor& kernels, Index stride, Index padding);
/// Gradient of <transposed_conv2d(y, K), g> with respect to K.
Tensor transposed_conv2d_grad_kernel(const Tensor& y, const Tensor& grad_out, const ConvParams& p,
                                     Index kernel_h, Index kernel_w);

/// Adds a per-channel bias to [N, C, H, W] in place.
void add_channel_bias(Tensor& x, const Tensor& bias);
/// Sums [N, C, H, W] over N, H and W.
Tensor channel_sums(const Tensor& g);

// Pointwise -----------------------------------------------------------------

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);
Tensor silu(const Tensor& x);
Tensor silu_backward(const Tensor& x, const Tensor& grad_out);
Tensor sigmoid(const Tensor& x);
/// Takes the sigmoid output rather than its input.
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

// Dense ---------------------------------------------------------------------

/// x [N, in] times weights [out, in] plus bias [out].
Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias);

// Group normalization ---------------------------------------------------------

struct GroupNormCache {
  Tensor normalized;  // x-hat, shape of x
  Vector inv_std;     // per (n, group)
  Index groups = 1;
};

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Index groups,
                  Real eps, GroupNormCache* cache = nullptr);
/// Returns dx; accumulates into grad_gamma / grad_beta.
Tensor group_norm_backward(const GroupNormCache& cache, const Tensor& gamma, const Tensor& grad_out,
                           Tensor& grad_gamma, Tensor& grad_beta);

/// Largest divisor of `channels` that is <= preferred.
Index group_count_for(Index channels, Index preferred = 8);

// Broadcasts and pooling ------------------------------------------------------

/// x [N, C, H, W] + v [N, C] broadcast over H and W.
Tensor add_broadcast(const Tensor& x, const Tensor& v);
/// Gradient of add_broadcast with respect to v.
Tensor broadcast_grad(const Tensor& grad_out);

Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor::Shape& input_shape, const Tensor& grad_out);

// Encodings -------------------------------------------------------------------

/// [sin(t w_0), .., sin(t w_{h-1}), cos(t w_0), .., cos(t w_{h-1})] with
/// w_j = 10000^(-j / h), h = dim / 2. Returns [N, dim].
Tensor sinusoidal_encoding(std::span<const int> steps, Index dim);

// Losses ----------------------------------------------------------------------

struct LossResult {
  Real value = 0;
  Tensor grad;  // gradient with respect to the prediction
};

/// Mean over all elements of (prediction - target)^2.
LossResult mse_loss(const Tensor& prediction, const Tensor& target);

/// Mean softmax cross-entropy of logits [N, K].
LossResult cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Row-wise softmax of [N, K].
Tensor softmax(const Tensor& logits);

}  // namespace spectradiff::nn
