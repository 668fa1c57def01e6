#include "spectradiff/unet.hpp"

#include "spectradiff/errors.hpp"

namespace spectradiff::unet {

using nn::Vector;

void UNetConfig::validate() const {
  if (depth < 1) throw ConfigError("unet: depth must be >= 1");
  if (base_channels < 1) throw ConfigError("unet: base_channels must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw ConfigError("unet: time_embed_dim must be even and >= 2");
  }
  if (class_count < 1) throw ConfigError("unet: class_count must be >= 1");
  if (latent_channels < 1) throw ConfigError("unet: latent_channels must be >= 1");
  if (latent_side % (Index(1) << depth) != 0 || bottleneck_side() < 2) {
    throw ConfigError("unet: latent side " + std::to_string(latent_side) + " with depth " +
                      std::to_string(depth) + " leaves a bottleneck side below 2");
  }
}

void check_conditioning(std::span<const int> steps, std::span<const int> labels, Index batch,
                        Index class_count) {
  if (static_cast<Index>(steps.size()) != batch || static_cast<Index>(labels.size()) != batch) {
    throw ArgumentError("denoiser: need one step and one label per batch element");
  }
  for (int t : steps) {
    if (t < 1) throw ArgumentError("denoiser: step " + std::to_string(t) + " must be >= 1");
  }
  for (int y : labels) {
    if (y < 0 || y >= class_count) {
      throw ArgumentError("denoiser: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(class_count) + ")");
    }
  }
}

// ConditionedBlock --------------------------------------------------------------

ConditionedBlock::ConditionedBlock(Index in_channels, Index out_channels, Index cond_dim,
                                   nn::Rng& rng)
    : norm1_(in_channels),
      norm2_(out_channels),
      conv1_(in_channels, out_channels, 3, 1, 1, rng),
      conv2_(out_channels, out_channels, 3, 1, 1, rng),
      proj_(cond_dim, out_channels, rng),
      project_skip_(in_channels != out_channels) {
  // The residual branch starts silent.
  conv2_.weight.value.flat().setZero();
  if (project_skip_) skip_ = nn::Conv2d(in_channels, out_channels, 1, 1, 0, rng);
}

Tensor ConditionedBlock::forward(const Tensor& x, const Tensor& cond) {
  Tensor h = conv1_.forward(act1_.forward(norm1_.forward(x)));
  h = nn::add_broadcast(h, proj_.forward(cond));
  h = conv2_.forward(act2_.forward(norm2_.forward(h)));
  h.flat() += project_skip_ ? skip_.forward(x).flat() : x.flat();
  return h;
}

Tensor ConditionedBlock::backward(const Tensor& grad_out, Tensor& grad_cond) {
  Tensor g = norm2_.backward(act2_.backward(conv2_.backward(grad_out)));
  grad_cond.flat() += proj_.backward(nn::broadcast_grad(g)).flat();
  Tensor dx = norm1_.backward(act1_.backward(conv1_.backward(g)));
  dx.flat() += project_skip_ ? skip_.backward(grad_out).flat() : grad_out.flat();
  return dx;
}

void ConditionedBlock::collect(nn::ParamStore& store, const std::string& prefix) {
  conv1_.collect(store, nn::join_path(prefix, "conv1"));
  norm1_.collect(store, nn::join_path(prefix, "norm1"));
  proj_.collect(store, nn::join_path(prefix, "cond_proj"));
  conv2_.collect(store, nn::join_path(prefix, "conv2"));
  norm2_.collect(store, nn::join_path(prefix, "norm2"));
  if (project_skip_) skip_.collect(store, nn::join_path(prefix, "skip"));
}

// UNet --------------------------------------------------------------------------

UNet::UNet(UNetConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Rng rng(seed);
  const Index tdim = config_.time_embed_dim;
  time_fc1_ = nn::Linear(tdim, tdim, rng);
  time_fc2_ = nn::Linear(tdim, tdim, rng);
  class_embed_ = nn::Embedding(config_.class_count, tdim, rng);
  in_conv_ = nn::Conv2d(config_.latent_channels, config_.channels_at(0), 3, 1, 1, rng);
  for (Index level = 0; level < config_.depth; ++level) {
    const Index c = config_.channels_at(level);
    down_blocks_.emplace_back(c, c, tdim, rng);
    downsample_.emplace_back(c, config_.channels_at(level + 1), 4, 2, 1, rng);
  }
  const Index cb = config_.channels_at(config_.depth);
  mid_ = ConditionedBlock(cb, cb, tdim, rng);
  for (Index level = 0; level < config_.depth; ++level) {
    const Index c = config_.channels_at(level);
    upsample_.emplace_back(config_.channels_at(level + 1), c, 4, 2, 1, rng);
    up_blocks_.emplace_back(2 * c, c, tdim, rng);
  }
  out_norm_ = nn::GroupNorm(config_.channels_at(0));
  out_conv_ = nn::Conv2d(config_.channels_at(0), config_.latent_channels, 3, 1, 1, rng);
  out_conv_.weight.value.flat().setZero();
}

Tensor UNet::predict(const Tensor& z_t, std::span<const int> steps, std::span<const int> labels) {
  const Index m = config_.latent_side;
  if (z_t.rank() != 4 || z_t.dim(1) != config_.latent_channels || z_t.dim(2) != m ||
      z_t.dim(3) != m) {
    throw ShapeError("unet: expected [N, " + std::to_string(config_.latent_channels) + ", " +
                     std::to_string(m) + ", " + std::to_string(m) + "], got " +
                     nn::shape_string(z_t.shape()));
  }
  check_conditioning(steps, labels, z_t.dim(0), config_.class_count);

  Tensor temb = time_fc2_.forward(
      time_act_.forward(time_fc1_.forward(nn::sinusoidal_encoding(steps, config_.time_embed_dim))));
  Tensor cemb = class_embed_.forward(labels);
  cond_ = cond_act_.forward(Tensor(temb.shape(), Vector(temb.flat() + cemb.flat())));

  Tensor h = in_conv_.forward(z_t);
  std::vector<Tensor> skips;
  for (Index level = 0; level < config_.depth; ++level) {
    h = down_blocks_[level].forward(h, cond_);
    skips.push_back(h);
    h = downsample_[level].forward(h);
  }
  h = mid_.forward(h, cond_);
  for (Index level = config_.depth - 1; level >= 0; --level) {
    h = upsample_[level].forward(h);
    h = up_blocks_[level].forward(nn::concat_channels(h, skips[level]), cond_);
  }
  return out_conv_.forward(out_act_.forward(out_norm_.forward(h)));
}

void UNet::backward(const Tensor& grad) {
  Tensor grad_cond(cond_.shape());
  Tensor g = out_norm_.backward(out_act_.backward(out_conv_.backward(grad)));
  std::vector<Tensor> skip_grads(static_cast<std::size_t>(config_.depth));
  for (Index level = 0; level < config_.depth; ++level) {
    Tensor g_up, g_skip;
    nn::split_channels(up_blocks_[level].backward(g, grad_cond), config_.channels_at(level), g_up,
                       g_skip);
    skip_grads[level] = std::move(g_skip);
    g = upsample_[level].backward(g_up);
  }
  g = mid_.backward(g, grad_cond);
  for (Index level = config_.depth - 1; level >= 0; --level) {
    g = downsample_[level].backward(g);
    g.flat() += skip_grads[level].flat();
    g = down_blocks_[level].backward(g, grad_cond);
  }
  input_grad_ = in_conv_.backward(g);

  Tensor d_sum = cond_act_.backward(grad_cond);
  class_embed_.backward(d_sum);
  time_fc1_.backward(time_act_.backward(time_fc2_.backward(d_sum)));
}

nn::ParamStore UNet::parameters() {
  nn::ParamStore store;
  time_fc1_.collect(store, "time.fc1");
  time_fc2_.collect(store, "time.fc2");
  class_embed_.collect(store, "class_embed");
  in_conv_.collect(store, "in_conv");
  for (Index level = 0; level < config_.depth; ++level) {
    const std::string l = std::to_string(level);
    down_blocks_[level].collect(store, "down" + l + ".block");
    downsample_[level].collect(store, "down" + l + ".downsample");
    upsample_[level].collect(store, "up" + l + ".upsample");
    up_blocks_[level].collect(store, "up" + l + ".block");
  }
  mid_.collect(store, "mid");
  out_norm_.collect(store, "out_norm");
  out_conv_.collect(store, "out_conv");
  return store;
}

void UNet::save(nn::Checkpoint& ckpt) {
  ckpt.meta["unet"] = {{"base_channels", config_.base_channels},
                       {"depth", config_.depth},
                       {"time_embed_dim", config_.time_embed_dim},
                       {"class_count", config_.class_count},
                       {"latent_side", config_.latent_side},
                       {"latent_channels", config_.latent_channels}};
  nn::save_params(ckpt, parameters(), "unet");
}

UNet UNet::load(const nn::Checkpoint& ckpt) {
  const auto& m = ckpt.meta.at("unet");
  UNetConfig config;
  config.base_channels = m.at("base_channels").get<Index>();
  config.depth = m.at("depth").get<Index>();
  config.time_embed_dim = m.at("time_embed_dim").get<Index>();
  config.class_count = m.at("class_count").get<Index>();
  config.latent_side = m.at("latent_side").get<Index>();
  config.latent_channels = m.at("latent_channels").get<Index>();
  UNet net(config, 0);
  nn::load_params(ckpt, net.parameters(), "unet");
  return net;
}

}  // namespace spectradiff::unet
