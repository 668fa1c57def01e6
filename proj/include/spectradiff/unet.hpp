#pragma once

#include "spectradiff/nn/checkpoint.hpp"
#include "spectradiff/nn/layers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace spectradiff {

/// Anything that predicts the noise in a batch of noised latents
/// [N, d, m, m] given per-sample steps t and class labels y.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  virtual nn::Tensor predict(const nn::Tensor& z_t, std::span<const int> steps,
                             std::span<const int> labels) = 0;
  /// Backpropagates d(loss)/d(prediction) of the most recent predict call.
  virtual void backward(const nn::Tensor& grad) { (void)grad; }
  virtual nn::ParamStore parameters() { return {}; }
};

namespace unet {

using nn::Index;
using nn::Real;
using nn::Tensor;

struct UNetConfig {
  Index base_channels = 64;
  Index depth = 2;
  Index time_embed_dim = 128;
  Index class_count = 2;
  Index latent_side = 8;      // m
  Index latent_channels = 16;  // d

  Index channels_at(Index level) const { return base_channels << level; }
  Index bottleneck_side() const { return latent_side >> depth; }
  void validate() const;
};

/// Pre-activation residual block with an additive conditioning vector:
/// x + conv(SiLU(GN(conv(SiLU(GN(x))) + proj(cond)))), with a 1x1 conv on
/// the shortcut when the channel count changes.
class ConditionedBlock {
 public:
  ConditionedBlock() = default;
  ConditionedBlock(Index in_channels, Index out_channels, Index cond_dim, nn::Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond);
  /// Returns dx; d(cond) is added to `grad_cond`.
  Tensor backward(const Tensor& grad_out, Tensor& grad_cond);
  void collect(nn::ParamStore& store, const std::string& prefix);

 private:
  nn::GroupNorm norm1_, norm2_;
  nn::Activation act1_{nn::ActivationKind::SiLU}, act2_{nn::ActivationKind::SiLU};
  nn::Conv2d conv1_, conv2_;
  nn::Linear proj_;
  bool project_skip_ = false;
  nn::Conv2d skip_;
};

/// Conditional noise predictor: sinusoidal step encoding through a 2-layer
/// MLP plus a learned class embedding, injected into every block; strided
/// convolutions down, transposed convolutions up, skips by concatenation.
class UNet final : public NoisePredictor {
 public:
  UNet(UNetConfig config, std::uint64_t seed);

  const UNetConfig& config() const { return config_; }

  Tensor predict(const Tensor& z_t, std::span<const int> steps,
                 std::span<const int> labels) override;
  void backward(const Tensor& grad) override;
  nn::ParamStore parameters() override;

  /// Gradient with respect to z_t from the last backward call.
  const Tensor& input_grad() const { return input_grad_; }

  Index parameter_count() { return parameters().scalar_count(); }

  void save(nn::Checkpoint& ckpt);
  static UNet load(const nn::Checkpoint& ckpt);

 private:
  UNetConfig config_;
  nn::Linear time_fc1_, time_fc2_;
  nn::Activation time_act_{nn::ActivationKind::SiLU};
  nn::Embedding class_embed_;
  nn::Activation cond_act_{nn::ActivationKind::SiLU};
  nn::Conv2d in_conv_, out_conv_;
  nn::GroupNorm out_norm_;
  nn::Activation out_act_{nn::ActivationKind::SiLU};
  std::vector<ConditionedBlock> down_blocks_, up_blocks_;
  std::vector<nn::Conv2d> downsample_;
  std::vector<nn::ConvTranspose2d> upsample_;
  ConditionedBlock mid_;
  Tensor cond_;
  Tensor input_grad_;
};

/// Checks the step/label ranges used by predict (t >= 1, y in [0, classes)).
void check_conditioning(std::span<const int> steps, std::span<const int> labels, Index batch,
                        Index class_count);

}  // namespace unet
}  // namespace spectradiff
