#pragma once

#include "gradcheck.hpp"

#include "spectradiff/nn/layers.hpp"
#include "spectradiff/nn/ops.hpp"

#include <string>
#include <vector>

namespace testsupport {

struct NamedCheck {
  std::string name;
  GradCheck result;
};

// Finite-difference checks of every differentiable nn-core operation and
// layer. Each check uses the scalar sum(w * f(x)) with a fixed random w.
inline std::vector<NamedCheck> run_op_gradchecks(std::uint64_t seed = 5) {
  namespace nn = spectradiff::nn;
  std::mt19937_64 rng(seed);
  nn::Rng init(seed + 1);
  std::vector<NamedCheck> out;

  {  // conv2d, strided + padded, non-square kernel
    const nn::ConvParams p{2, 1, 1, 2};
    Tensor x = random_tensor({2, 3, 7, 6}, rng);
    Tensor k = random_tensor({4, 3, 3, 4}, rng);
    Tensor w = random_tensor(nn::conv2d(x, k, p).shape(), rng);
    auto loss = [&] { return weighted_sum(nn::conv2d(x, k, p), w); };
    Tensor gx = nn::conv2d_grad_input(w, k, p, x.shape());
    Tensor gk = nn::conv2d_grad_kernel(x, w, p, 3, 4);
    out.push_back({"conv2d/input", check_gradient(x, gx, loss)});
    out.push_back({"conv2d/kernel", check_gradient(k, gk, loss)});
  }
  {  // transposed conv
    const nn::ConvParams p = nn::ConvParams::square(2, 1);
    Tensor y = random_tensor({2, 3, 4, 4}, rng);
    Tensor k = random_tensor({3, 2, 4, 4}, rng);
    Tensor w = random_tensor(nn::transposed_conv2d(y, k, p).shape(), rng);
    auto loss = [&] { return weighted_sum(nn::transposed_conv2d(y, k, p), w); };
    Tensor gy = nn::conv2d(w, k, p);
    Tensor gk = nn::transposed_conv2d_grad_kernel(y, w, p, 4, 4);
    out.push_back({"transposed_conv2d/input", check_gradient(y, gy, loss)});
    out.push_back({"transposed_conv2d/kernel", check_gradient(k, gk, loss)});
  }
  {  // channel bias
    Tensor x = random_tensor({2, 3, 4, 5}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor w = random_tensor(x.shape(), rng);
    auto loss = [&] {
      Tensor y = x;
      nn::add_channel_bias(y, b);
      return weighted_sum(y, w);
    };
    out.push_back({"add_channel_bias/bias", check_gradient(b, nn::channel_sums(w), loss)});
  }
  {  // activations
    Tensor x = random_tensor({3, 2, 4, 4}, rng, 0.05);
    Tensor w = random_tensor(x.shape(), rng);
    out.push_back({"relu", check_gradient(x, nn::relu_backward(x, w),
                                          [&] { return weighted_sum(nn::relu(x), w); })});
    out.push_back({"silu", check_gradient(x, nn::silu_backward(x, w),
                                          [&] { return weighted_sum(nn::silu(x), w); })});
    out.push_back({"sigmoid", check_gradient(x, nn::sigmoid_backward(nn::sigmoid(x), w),
                                             [&] { return weighted_sum(nn::sigmoid(x), w); })});
  }
  {  // group norm
    Tensor x = random_tensor({2, 6, 3, 3}, rng);
    Tensor gamma = random_tensor({6}, rng);
    Tensor beta = random_tensor({6}, rng);
    Tensor w = random_tensor(x.shape(), rng);
    nn::GroupNormCache cache;
    nn::group_norm(x, gamma, beta, 3, 1e-5, &cache);
    Tensor gg({6}), gb({6});
    Tensor gx = nn::group_norm_backward(cache, gamma, w, gg, gb);
    auto loss = [&] { return weighted_sum(nn::group_norm(x, gamma, beta, 3, 1e-5), w); };
    out.push_back({"group_norm/input", check_gradient(x, gx, loss)});
    out.push_back({"group_norm/gamma", check_gradient(gamma, gg, loss)});
    out.push_back({"group_norm/beta", check_gradient(beta, gb, loss)});
  }
  {  // broadcast add and pooling
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor v = random_tensor({2, 3}, rng);
    Tensor w = random_tensor(x.shape(), rng);
    auto loss = [&] { return weighted_sum(nn::add_broadcast(x, v), w); };
    out.push_back({"add_broadcast/input", check_gradient(x, w, loss)});
    out.push_back({"add_broadcast/vector", check_gradient(v, nn::broadcast_grad(w), loss)});
    Tensor wp = random_tensor({2, 3}, rng);
    out.push_back({"global_avg_pool",
                   check_gradient(x, nn::global_avg_pool_backward(x.shape(), wp),
                                  [&] { return weighted_sum(nn::global_avg_pool(x), wp); })});
  }
  {  // losses
    Tensor pred = random_tensor({3, 5}, rng);
    Tensor target = random_tensor({3, 5}, rng);
    out.push_back({"mse_loss", check_gradient(pred, nn::mse_loss(pred, target).grad,
                                              [&] { return nn::mse_loss(pred, target).value; })});
    const std::vector<int> labels{0, 4, 2};
    out.push_back({"cross_entropy", check_gradient(pred, nn::cross_entropy(pred, labels).grad,
                                                   [&] { return nn::cross_entropy(pred, labels).value; })});
  }
  {  // layers: conv, transposed conv, linear, group norm, embedding
    nn::Conv2d conv(2, 3, 3, 2, 1, init);
    Tensor x = random_tensor({2, 2, 6, 6}, rng);
    Tensor w = random_tensor(conv.forward(x).shape(), rng);
    conv.forward(x);
    Tensor gx = conv.backward(w);
    auto loss = [&] { return weighted_sum(conv.forward(x), w); };
    out.push_back({"Conv2d/input", check_gradient(x, gx, loss)});
    out.push_back({"Conv2d/weight", check_gradient(conv.weight.value, conv.weight.grad, loss)});
    out.push_back({"Conv2d/bias", check_gradient(conv.bias.value, conv.bias.grad, loss)});
  }
  {
    nn::ConvTranspose2d tconv(3, 2, 4, 2, 1, init);
    Tensor x = random_tensor({2, 3, 3, 3}, rng);
    Tensor w = random_tensor(tconv.forward(x).shape(), rng);
    tconv.forward(x);
    Tensor gx = tconv.backward(w);
    auto loss = [&] { return weighted_sum(tconv.forward(x), w); };
    out.push_back({"ConvTranspose2d/input", check_gradient(x, gx, loss)});
    out.push_back({"ConvTranspose2d/weight", check_gradient(tconv.weight.value, tconv.weight.grad, loss)});
    out.push_back({"ConvTranspose2d/bias", check_gradient(tconv.bias.value, tconv.bias.grad, loss)});
  }
  {
    nn::Linear lin(5, 4, init);
    Tensor x = random_tensor({3, 5}, rng);
    Tensor w = random_tensor({3, 4}, rng);
    lin.forward(x);
    Tensor gx = lin.backward(w);
    auto loss = [&] { return weighted_sum(lin.forward(x), w); };
    out.push_back({"Linear/input", check_gradient(x, gx, loss)});
    out.push_back({"Linear/weight", check_gradient(lin.weight.value, lin.weight.grad, loss)});
    out.push_back({"Linear/bias", check_gradient(lin.bias.value, lin.bias.grad, loss)});
  }
  {
    nn::GroupNorm gn(4, 2);
    gn.gamma.value = random_tensor({4}, rng);
    gn.beta.value = random_tensor({4}, rng);
    Tensor x = random_tensor({2, 4, 3, 3}, rng);
    Tensor w = random_tensor(x.shape(), rng);
    gn.forward(x);
    Tensor gx = gn.backward(w);
    auto loss = [&] { return weighted_sum(gn.forward(x), w); };
    out.push_back({"GroupNorm/input", check_gradient(x, gx, loss)});
    out.push_back({"GroupNorm/gamma", check_gradient(gn.gamma.value, gn.gamma.grad, loss)});
  }
  {
    nn::Embedding emb(4, 3, init);
    const std::vector<int> ids{2, 0, 2};
    Tensor w = random_tensor({3, 3}, rng);
    emb.forward(ids);
    emb.backward(w);
    auto loss = [&] { return weighted_sum(emb.forward(ids), w); };
    out.push_back({"Embedding/table", check_gradient(emb.table.value, emb.table.grad, loss)});
  }
  return out;
}

}  // namespace testsupport
