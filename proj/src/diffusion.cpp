#include "spectradiff/diffusion.hpp"

#include <algorithm>
#include <numeric>

namespace spectradiff::diffusion {

Tensor q_sample(const Tensor& z0, int t, const Tensor& eps, const DiffusionSchedule<Real>& schedule) {
  if (!z0.same_shape(eps)) throw ShapeError("q_sample: noise shape differs from latent shape");
  return Tensor(z0.shape(), q_sample(z0.flat(), t, eps.flat(), schedule));
}

// LatentStats -------------------------------------------------------------------

LatentStats LatentStats::identity(Index channels) {
  return {Vector::Zero(channels), Vector::Ones(channels)};
}

LatentStats LatentStats::fit(const Tensor& z) {
  const Index n = z.dim(0), c = z.dim(1), plane = z.dim(2) * z.dim(3);
  LatentStats s{Vector::Zero(c), Vector::Zero(c)};
  for (Index ch = 0; ch < c; ++ch) {
    Real sum = 0;
    for (Index i = 0; i < n; ++i) sum += z.flat().segment((i * c + ch) * plane, plane).sum();
    const Real mean = sum / Real(n * plane);
    Real sq = 0;
    for (Index i = 0; i < n; ++i) {
      sq += (z.flat().segment((i * c + ch) * plane, plane).array() - mean).square().sum();
    }
    const Real sd = std::sqrt(sq / Real(n * plane));
    s.mean[ch] = mean;
    s.std[ch] = sd > 1e-8 ? sd : Real(1);
  }
  return s;
}

Tensor LatentStats::normalize(const Tensor& z) const {
  Tensor out = z;
  const Index n = z.dim(0), c = z.dim(1), plane = z.dim(2) * z.dim(3);
  if (c != mean.size()) throw ShapeError("latent stats: channel count mismatch");
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      auto seg = out.flat().segment((i * c + ch) * plane, plane);
      seg = (seg.array() - mean[ch]) / std[ch];
    }
  }
  return out;
}

Tensor LatentStats::denormalize(const Tensor& z) const {
  Tensor out = z;
  const Index n = z.dim(0), c = z.dim(1), plane = z.dim(2) * z.dim(3);
  if (c != mean.size()) throw ShapeError("latent stats: channel count mismatch");
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      auto seg = out.flat().segment((i * c + ch) * plane, plane);
      seg = seg.array() * std[ch] + mean[ch];
    }
  }
  return out;
}

// DiffusionModel ----------------------------------------------------------------

DiffusionModel::DiffusionModel(DiffusionSchedule<Real> schedule,
                               std::unique_ptr<NoisePredictor> denoiser, int class_count,
                               Index latent_channels, Index latent_side)
    : schedule_(std::move(schedule)),
      denoiser_(std::move(denoiser)),
      class_count_(class_count),
      latent_channels_(latent_channels),
      latent_side_(latent_side),
      stats_(LatentStats::identity(latent_channels)) {
  if (!denoiser_) throw ArgumentError("diffusion: null denoiser");
  if (class_count_ < 1) throw ArgumentError("diffusion: class_count must be >= 1");
  if (latent_channels_ < 1 || latent_side_ < 1) throw ArgumentError("diffusion: empty latent shape");
}

Tensor DiffusionModel::predict_noise(const Tensor& z_t, std::span<const int> steps,
                                     std::span<const int> labels) {
  for (int t : steps) schedule_.check_step(t);
  for (int y : labels) {
    if (y < 0 || y >= class_count_) {
      throw ArgumentError("diffusion: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(class_count_) + ")");
    }
  }
  return denoiser_->predict(z_t, steps, labels);
}

void DiffusionModel::save(nn::Checkpoint& ckpt) {
  auto* net = dynamic_cast<unet::UNet*>(denoiser_.get());
  if (!net) throw ArgumentError("diffusion: only U-Net denoisers can be saved");
  ckpt.meta["ddpm"] = {{"steps", schedule_.steps()},
                       {"beta_start", schedule_.beta_start},
                       {"beta_end", schedule_.beta_end},
                       {"class_count", class_count_}};
  ckpt.tensors["ddpm.latent_mean"] = Tensor({stats_.mean.size()}, stats_.mean);
  ckpt.tensors["ddpm.latent_std"] = Tensor({stats_.std.size()}, stats_.std);
  net->save(ckpt);
}

DiffusionModel DiffusionModel::load(const nn::Checkpoint& ckpt) {
  const auto& m = ckpt.meta.at("ddpm");
  auto schedule = linear_beta_schedule<Real>(m.at("steps").get<int>(), m.at("beta_start").get<Real>(),
                                             m.at("beta_end").get<Real>());
  auto net = std::make_unique<unet::UNet>(unet::UNet::load(ckpt));
  const Index channels = net->config().latent_channels;
  const Index side = net->config().latent_side;
  DiffusionModel model(std::move(schedule), std::move(net), m.at("class_count").get<int>(),
                       channels, side);
  model.set_stats({ckpt.tensor("ddpm.latent_mean").flat(), ckpt.tensor("ddpm.latent_std").flat()});
  return model;
}

// Loss and sampling ---------------------------------------------------------------

Tensor standard_normal(const Tensor::Shape& shape, nn::Rng& rng) {
  Tensor t(shape);
  std::normal_distribution<Real> normal(0.0, 1.0);
  for (Index i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

DdpmLoss ddpm_loss(DiffusionModel& model, const Tensor& z0, std::span<const int> labels,
                   nn::Rng& rng) {
  const Index n = z0.dim(0);
  if (static_cast<Index>(labels.size()) != n) {
    throw ArgumentError("ddpm_loss: need one label per latent");
  }
  for (int y : labels) {
    if (y < 0 || y >= model.class_count()) {
      throw ArgumentError("ddpm_loss: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(model.class_count()) + ")");
    }
  }
  const auto& sched = model.schedule();
  std::uniform_int_distribution<int> step_dist(1, sched.steps());
  DdpmLoss out;
  out.steps.resize(static_cast<std::size_t>(n));
  for (auto& t : out.steps) t = step_dist(rng);
  out.noise = standard_normal(z0.shape(), rng);

  const Index stride = z0.size() / std::max<Index>(n, 1);
  Tensor z_t(z0.shape());
  for (Index i = 0; i < n; ++i) {
    z_t.flat().segment(i * stride, stride) =
        q_sample(z0.flat().segment(i * stride, stride), out.steps[static_cast<std::size_t>(i)],
                 out.noise.flat().segment(i * stride, stride), sched);
  }
  Tensor pred = model.predict_noise(z_t, out.steps, labels);
  nn::LossResult mse = nn::mse_loss(pred, out.noise);
  out.value = mse.value;
  out.grad = std::move(mse.grad);
  return out;
}

Tensor p_sample_step(DiffusionModel& model, const Tensor& z_t, int t, std::span<const int> labels,
                     nn::Rng& rng) {
  const auto& sched = model.schedule();
  sched.check_step(t);
  const std::vector<int> steps(static_cast<std::size_t>(z_t.dim(0)), t);
  Tensor eps_hat = model.predict_noise(z_t, steps, labels);
  Tensor noise = t > 1 ? standard_normal(z_t.shape(), rng) : Tensor(z_t.shape());
  return Tensor(z_t.shape(), reverse_step(z_t.flat(), eps_hat.flat(), noise.flat(), t, sched));
}

std::vector<Tensor> sample(DiffusionModel& model, int label, int count, nn::Rng& rng) {
  if (label < 0 || label >= model.class_count()) {
    throw ArgumentError("sample: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(model.class_count()) + ")");
  }
  if (count < 0) throw ArgumentError("sample: count must be >= 0");
  constexpr int kChunk = 64;
  const Index d = model.latent_channels(), m = model.latent_side();
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int begin = 0; begin < count; begin += kChunk) {
    const int n = std::min(kChunk, count - begin);
    const std::vector<int> labels(static_cast<std::size_t>(n), label);
    Tensor z = standard_normal({n, d, m, m}, rng);
    for (int t = model.schedule().steps(); t >= 1; --t) {
      z = p_sample_step(model, z, t, labels, rng);
      if (!z.flat().allFinite()) {
        throw SamplingError("sample: non-finite latent at step t = " + std::to_string(t));
      }
    }
    z = model.stats().denormalize(z);
    for (int i = 0; i < n; ++i) out.push_back(z.slice(i, 1).reshaped({d, m, m}));
  }
  return out;
}

Tensor quantized_latents(vq::VqVaeModel& vqvae, const LabeledDataset& dataset) {
  if (dataset.empty()) throw ArgumentError("quantized_latents: empty dataset");
  const Tensor x = vq::figures_to_batch(vq::dataset_figures(dataset, vqvae.config().figure_side));
  return vqvae.quantize_batch(vqvae.encode_batch(x)).values;
}

DdpmTrainLog train_ddpm(DiffusionModel& model, vq::VqVaeModel& vqvae, const LabeledDataset& dataset,
                        const DdpmTrainConfig& config) {
  if (dataset.empty()) throw ArgumentError("train_ddpm: empty dataset");
  if (config.epochs == 0) return {};
  const Tensor latents = quantized_latents(vqvae, dataset);
  const std::vector<int> labels = dataset.labels();
  return train_ddpm_on_latents(model, latents, labels, config);
}

DdpmTrainLog train_ddpm_on_latents(DiffusionModel& model, const Tensor& latents,
                                   std::span<const int> labels, const DdpmTrainConfig& config) {
  if (config.epochs < 0 || config.batch_size < 1) {
    throw ArgumentError("train_ddpm: epochs must be >= 0 and batch size >= 1");
  }
  if (latents.rank() != 4 || latents.dim(0) == 0 ||
      latents.dim(0) != static_cast<Index>(labels.size())) {
    throw ArgumentError("train_ddpm: need a non-empty latent batch with one label each");
  }
  if (latents.dim(1) != model.latent_channels() || latents.dim(2) != model.latent_side()) {
    throw ShapeError("train_ddpm: latents " + nn::shape_string(latents.shape()) +
                     " do not match the model latent shape");
  }
  DdpmTrainLog log;
  if (config.epochs == 0) return log;

  model.set_stats(LatentStats::fit(latents));
  const Tensor z0 = model.stats().normalize(latents);
  const Index stride = z0.size() / z0.dim(0);

  nn::Rng rng(config.seed);
  nn::AdamState adam(config.learning_rate);
  nn::ParamStore params = model.denoiser().parameters();
  params.zero_grad();
  std::vector<Index> order(static_cast<std::size_t>(z0.dim(0)));
  std::iota(order.begin(), order.end(), Index(0));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    Real total = 0;
    int batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      ++batch_no;
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      Tensor::Shape shape = z0.shape();
      shape[0] = static_cast<Index>(end - begin);
      Tensor batch(shape);
      std::vector<int> batch_labels;
      for (std::size_t i = begin; i < end; ++i) {
        batch.flat().segment(static_cast<Index>(i - begin) * stride, stride) =
            z0.flat().segment(order[i] * stride, stride);
        batch_labels.push_back(labels[static_cast<std::size_t>(order[i])]);
      }
      DdpmLoss loss = ddpm_loss(model, batch, batch_labels, rng);
      if (!std::isfinite(loss.value)) {
        throw TrainingError("train_ddpm: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_no));
      }
      model.denoiser().backward(loss.grad);
      nn::adam_step(adam, params);
      total += loss.value * Real(end - begin);
    }
    log.epoch_loss.push_back(total / Real(order.size()));
  }
  return log;
}

}  // namespace spectradiff::diffusion
