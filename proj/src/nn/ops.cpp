#include "spectradiff/nn/ops.hpp"

#include "spectradiff/errors.hpp"

#include <cmath>

namespace spectradiff::nn {

namespace {

struct ConvDims {
  Index n, c_in, h, w, c_out, kh, kw, out_h, out_w;
};

Index conv_out_extent(Index in, Index k, Index stride, Index pad) {
  return (in + 2 * pad - k) / stride + 1;
}

ConvDims conv_dims(const Tensor::Shape& x, const Tensor::Shape& k, const ConvParams& p) {
  if (x.size() != 4 || k.size() != 4 || x[1] != k[1]) {
    throw ShapeError("conv2d: input " + shape_string(x) + " incompatible with kernels " +
                     shape_string(k));
  }
  if (p.stride_h < 1 || p.stride_w < 1 || p.pad_h < 0 || p.pad_w < 0) {
    throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  }
  if (x[2] + 2 * p.pad_h < k[2] || x[3] + 2 * p.pad_w < k[3]) {
    throw ShapeError("conv2d: kernels " + shape_string(k) + " larger than padded input " +
                     shape_string(x));
  }
  return {x[0], x[1], x[2], x[3], k[0], k[2], k[3],
          conv_out_extent(x[2], k[2], p.stride_h, p.pad_h),
          conv_out_extent(x[3], k[3], p.stride_w, p.pad_w)};
}

// Rows index (c, ki, kj); columns index (n, oh, ow).
RowMatrix im2col(const Tensor& x, const ConvDims& d, const ConvParams& p) {
  const Index cols = d.n * d.out_h * d.out_w;
  RowMatrix out(d.c_in * d.kh * d.kw, cols);
  for (Index c = 0; c < d.c_in; ++c) {
    for (Index ki = 0; ki < d.kh; ++ki) {
      for (Index kj = 0; kj < d.kw; ++kj) {
        Real* row = out.row((c * d.kh + ki) * d.kw + kj).data();
        for (Index n = 0; n < d.n; ++n) {
          const Real* plane = x.data() + (n * d.c_in + c) * d.h * d.w;
          for (Index oh = 0; oh < d.out_h; ++oh) {
            const Index ih = oh * p.stride_h - p.pad_h + ki;
            Real* dst = row + (n * d.out_h + oh) * d.out_w;
            if (ih < 0 || ih >= d.h) {
              std::fill(dst, dst + d.out_w, Real(0));
              continue;
            }
            for (Index ow = 0; ow < d.out_w; ++ow) {
              const Index iw = ow * p.stride_w - p.pad_w + kj;
              dst[ow] = (iw < 0 || iw >= d.w) ? Real(0) : plane[ih * d.w + iw];
            }
          }
        }
      }
    }
  }
  return out;
}

void col2im(const RowMatrix& cols, const ConvDims& d, const ConvParams& p, Tensor& x) {
  for (Index c = 0; c < d.c_in; ++c) {
    for (Index ki = 0; ki < d.kh; ++ki) {
      for (Index kj = 0; kj < d.kw; ++kj) {
        const Real* row = cols.row((c * d.kh + ki) * d.kw + kj).data();
        for (Index n = 0; n < d.n; ++n) {
          Real* plane = x.data() + (n * d.c_in + c) * d.h * d.w;
          for (Index oh = 0; oh < d.out_h; ++oh) {
            const Index ih = oh * p.stride_h - p.pad_h + ki;
            if (ih < 0 || ih >= d.h) continue;
            const Real* src = row + (n * d.out_h + oh) * d.out_w;
            for (Index ow = 0; ow < d.out_w; ++ow) {
              const Index iw = ow * p.stride_w - p.pad_w + kj;
              if (iw >= 0 && iw < d.w) plane[ih * d.w + iw] += src[ow];
            }
          }
        }
      }
    }
  }
}

Eigen::Map<const RowMatrix> kernel_matrix(const Tensor& k) {
  return {k.data(), k.dim(0), k.dim(1) * k.dim(2) * k.dim(3)};
}

// [N, C, P] <-> [C, N * P]
RowMatrix to_channel_major(const Tensor& g, Index n, Index c, Index plane) {
  RowMatrix out(c, n * plane);
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      out.row(ch).segment(i * plane, plane) =
          g.flat().segment((i * c + ch) * plane, plane).transpose();
    }
  }
  return out;
}

void from_channel_major(const RowMatrix& m, Index n, Index c, Index plane, Tensor& out) {
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      out.flat().segment((i * c + ch) * plane, plane) =
          m.row(ch).segment(i * plane, plane).transpose();
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernels, const ConvParams& p) {
  const ConvDims d = conv_dims(x.shape(), kernels.shape(), p);
  const RowMatrix cols = im2col(x, d, p);
  const RowMatrix out = kernel_matrix(kernels) * cols;
  Tensor y({d.n, d.c_out, d.out_h, d.out_w});
  from_channel_major(out, d.n, d.c_out, d.out_h * d.out_w, y);
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, Index stride, Index padding) {
  return conv2d(x, kernels, ConvParams::square(stride, padding));
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernels, const ConvParams& p,
                         const Tensor::Shape& input_shape) {
  const ConvDims d = conv_dims(input_shape, kernels.shape(), p);
  if (grad_out.shape() != Tensor::Shape{d.n, d.c_out, d.out_h, d.out_w}) {
    throw ShapeError("conv2d backward: gradient " + shape_string(grad_out.shape()) +
                     " does not match output shape " +
                     shape_string({d.n, d.c_out, d.out_h, d.out_w}));
  }
  const RowMatrix g = to_channel_major(grad_out, d.n, d.c_out, d.out_h * d.out_w);
  const RowMatrix cols = kernel_matrix(kernels).transpose() * g;
  Tensor dx(input_shape);
  col2im(cols, d, p, dx);
  return dx;
}

Tensor conv2d_grad_kernel(const Tensor& x, const Tensor& grad_out, const ConvParams& p,
                          Index kernel_h, Index kernel_w) {
  if (grad_out.rank() != 4) throw ShapeError("conv2d backward: gradient must be rank 4");
  const Tensor::Shape kshape{grad_out.dim(1), x.dim(1), kernel_h, kernel_w};
  const ConvDims d = conv_dims(x.shape(), kshape, p);
  if (grad_out.shape() != Tensor::Shape{d.n, d.c_out, d.out_h, d.out_w}) {
    throw ShapeError("conv2d backward: gradient " + shape_string(grad_out.shape()) +
                     " does not match input " + shape_string(x.shape()));
  }
  const RowMatrix cols = im2col(x, d, p);
  const RowMatrix g = to_channel_major(grad_out, d.n, d.c_out, d.out_h * d.out_w);
  Tensor dk(kshape);
  Eigen::Map<RowMatrix>(dk.data(), d.c_out, d.c_in * d.kh * d.kw).noalias() = g * cols.transpose();
  return dk;
}

Tensor transposed_conv2d(const Tensor& y, const Tensor& kernels, const ConvParams& p) {
  if (y.rank() != 4 || kernels.rank() != 4 || y.dim(1) != kernels.dim(0)) {
    throw ShapeError("transposed_conv2d: input " + shape_string(y.shape()) +
                     " incompatible with kernels " + shape_string(kernels.shape()));
  }
  const Index out_h = (y.dim(2) - 1) * p.stride_h - 2 * p.pad_h + kernels.dim(2);
  const Index out_w = (y.dim(3) - 1) * p.stride_w - 2 * p.pad_w + kernels.dim(3);
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("transposed_conv2d: empty output for input " + shape_string(y.shape()));
  }
  return conv2d_grad_input(y, kernels, p, {y.dim(0), kernels.dim(1), out_h, out_w});
}

Tensor transposed_conv2d(const Tensor& y, const Tensor& kernels, Index stride, Index padding) {
  return transposed_conv2d(y, kernels, ConvParams::square(stride, padding));
}

Tensor transposed_conv2d_grad_kernel(const Tensor& y, const Tensor& grad_out, const ConvParams& p,
                                     Index kernel_h, Index kernel_w) {
  // <tconv(y, K), g> = <y, conv(g, K)>, so the roles of input and output swap.
  return conv2d_grad_kernel(grad_out, y, p, kernel_h, kernel_w);
}

void add_channel_bias(Tensor& x, const Tensor& bias) {
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (bias.size() != c) throw ShapeError("bias: expected " + std::to_string(c) + " channels");
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      x.flat().segment((i * c + ch) * plane, plane).array() += bias[ch];
    }
  }
}

Tensor channel_sums(const Tensor& g) {
  const Index n = g.dim(0), c = g.dim(1), plane = g.dim(2) * g.dim(3);
  Tensor out({c});
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      out[ch] += g.flat().segment((i * c + ch) * plane, plane).sum();
    }
  }
  return out;
}

// Pointwise -----------------------------------------------------------------

Tensor relu(const Tensor& x) {
  return Tensor(x.shape(), x.flat().cwiseMax(Real(0)));
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  return Tensor(x.shape(), (x.flat().array() > 0).select(grad_out.flat(), Real(0)));
}

Tensor silu(const Tensor& x) {
  const auto& v = x.flat().array();
  return Tensor(x.shape(), Vector(v / (Real(1) + (-v).exp())));
}

Tensor silu_backward(const Tensor& x, const Tensor& grad_out) {
  const auto& v = x.flat().array();
  const auto s = (Real(1) / (Real(1) + (-v).exp())).eval();
  return Tensor(x.shape(), Vector(grad_out.flat().array() * s * (Real(1) + v * (Real(1) - s))));
}

Tensor sigmoid(const Tensor& x) {
  return Tensor(x.shape(), Vector(Real(1) / (Real(1) + (-x.flat().array()).exp())));
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  const auto& s = y.flat().array();
  return Tensor(y.shape(), Vector(grad_out.flat().array() * s * (Real(1) - s)));
}

// Dense ---------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (x.rank() != 2 || weights.rank() != 2 || x.dim(1) != weights.dim(1) ||
      bias.size() != weights.dim(0)) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " weights " +
                     shape_string(weights.shape()) + " bias " + shape_string(bias.shape()));
  }
  Tensor y({x.dim(0), weights.dim(0)});
  y.matrix().noalias() = x.matrix() * weights.matrix().transpose();
  y.matrix().rowwise() += bias.flat().transpose();
  return y;
}

// Group normalization ---------------------------------------------------------

Index group_count_for(Index channels, Index preferred) {
  for (Index g = std::min(preferred, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Index groups, Real eps,
                  GroupNormCache* cache) {
  if (x.rank() != 4 || x.dim(1) % groups != 0 || gamma.size() != x.dim(1) ||
      beta.size() != x.dim(1)) {
    throw ShapeError("group_norm: input " + shape_string(x.shape()) + " with " +
                     std::to_string(groups) + " groups");
  }
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const Index per_group = c / groups * plane;
  Tensor xhat(x.shape());
  Vector inv_std(n * groups);
  for (Index i = 0; i < n * groups; ++i) {
    const auto seg = x.flat().segment(i * per_group, per_group);
    const Real mean = seg.mean();
    const Real var = (seg.array() - mean).square().mean();
    inv_std[i] = Real(1) / std::sqrt(var + eps);
    xhat.flat().segment(i * per_group, per_group) = (seg.array() - mean) * inv_std[i];
  }
  Tensor y(x.shape());
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (i * c + ch) * plane;
      y.flat().segment(off, plane) =
          xhat.flat().segment(off, plane).array() * gamma[ch] + beta[ch];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->groups = groups;
  }
  return y;
}

Tensor group_norm_backward(const GroupNormCache& cache, const Tensor& gamma, const Tensor& grad_out,
                           Tensor& grad_gamma, Tensor& grad_beta) {
  const Tensor& xhat = cache.normalized;
  const Index n = xhat.dim(0), c = xhat.dim(1), plane = xhat.dim(2) * xhat.dim(3);
  const Index groups = cache.groups;
  const Index per_group = c / groups * plane;
  Tensor dxhat(xhat.shape());
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (i * c + ch) * plane;
      const auto g = grad_out.flat().segment(off, plane);
      grad_gamma[ch] += g.dot(xhat.flat().segment(off, plane));
      grad_beta[ch] += g.sum();
      dxhat.flat().segment(off, plane) = g * gamma[ch];
    }
  }
  Tensor dx(xhat.shape());
  for (Index i = 0; i < n * groups; ++i) {
    const auto dh = dxhat.flat().segment(i * per_group, per_group);
    const auto h = xhat.flat().segment(i * per_group, per_group);
    const Real mean_dh = dh.mean();
    const Real mean_dh_h = dh.dot(h) / Real(per_group);
    dx.flat().segment(i * per_group, per_group) =
        cache.inv_std[i] * (dh.array() - mean_dh - h.array() * mean_dh_h);
  }
  return dx;
}

// Broadcasts and pooling ------------------------------------------------------

Tensor add_broadcast(const Tensor& x, const Tensor& v) {
  if (x.rank() != 4 || v.rank() != 2 || v.dim(0) != x.dim(0) || v.dim(1) != x.dim(1)) {
    throw ShapeError("add_broadcast: " + shape_string(x.shape()) + " + " + shape_string(v.shape()));
  }
  Tensor y = x;
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      y.flat().segment((i * c + ch) * plane, plane).array() += v[i * c + ch];
    }
  }
  return y;
}

Tensor broadcast_grad(const Tensor& grad_out) {
  const Index n = grad_out.dim(0), c = grad_out.dim(1), plane = grad_out.dim(2) * grad_out.dim(3);
  Tensor g({n, c});
  for (Index i = 0; i < n * c; ++i) g[i] = grad_out.flat().segment(i * plane, plane).sum();
  return g;
}

Tensor global_avg_pool(const Tensor& x) {
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor y({n, c});
  for (Index i = 0; i < n * c; ++i) y[i] = x.flat().segment(i * plane, plane).mean();
  return y;
}

Tensor global_avg_pool_backward(const Tensor::Shape& input_shape, const Tensor& grad_out) {
  Tensor dx(input_shape);
  const Index plane = input_shape[2] * input_shape[3];
  for (Index i = 0; i < grad_out.size(); ++i) {
    dx.flat().segment(i * plane, plane).setConstant(grad_out[i] / Real(plane));
  }
  return dx;
}

// Encodings -------------------------------------------------------------------

Tensor sinusoidal_encoding(std::span<const int> steps, Index dim) {
  if (dim < 2 || dim % 2 != 0) throw ArgumentError("sinusoidal_encoding: dim must be even and >= 2");
  const Index half = dim / 2;
  Tensor out({static_cast<Index>(steps.size()), dim});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (Index j = 0; j < half; ++j) {
      const Real freq = std::exp(-std::log(Real(10000)) * Real(j) / Real(half));
      const Real arg = Real(steps[i]) * freq;
      out[static_cast<Index>(i) * dim + j] = std::sin(arg);
      out[static_cast<Index>(i) * dim + half + j] = std::cos(arg);
    }
  }
  return out;
}

// Losses ----------------------------------------------------------------------

LossResult mse_loss(const Tensor& prediction, const Tensor& target) {
  if (!prediction.same_shape(target)) {
    throw ShapeError("mse_loss: " + shape_string(prediction.shape()) + " vs " +
                     shape_string(target.shape()));
  }
  const Vector diff = prediction.flat() - target.flat();
  const Real n = Real(diff.size());
  return {diff.squaredNorm() / n, Tensor(prediction.shape(), Vector(Real(2) / n * diff))};
}

Tensor softmax(const Tensor& logits) {
  Tensor p(logits.shape());
  auto in = logits.matrix();
  auto out = p.matrix();
  for (Index i = 0; i < in.rows(); ++i) {
    const Real mx = in.row(i).maxCoeff();
    out.row(i) = (in.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return p;
}

LossResult cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || static_cast<Index>(labels.size()) != logits.dim(0)) {
    throw ShapeError("cross_entropy: logits " + shape_string(logits.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
  }
  const Index n = logits.dim(0), k = logits.dim(1);
  Tensor grad = softmax(logits);
  auto in = logits.matrix();
  auto g = grad.matrix();
  Real loss = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw ArgumentError("cross_entropy: label out of range");
    const Real mx = in.row(i).maxCoeff();
    const Real lse = mx + std::log((in.row(i).array() - mx).exp().sum());
    loss += lse - in(i, y);
    g(i, y) -= Real(1);
  }
  grad.flat() /= Real(n);
  return {loss / Real(n), std::move(grad)};
}

}  // namespace spectradiff::nn
