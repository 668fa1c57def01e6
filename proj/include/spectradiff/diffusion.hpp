#pragma once

#include "spectradiff/errors.hpp"
#include "spectradiff/nn/checkpoint.hpp"
#include "spectradiff/unet.hpp"
#include "spectradiff/vqvae.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace spectradiff::diffusion {

using nn::Index;
using nn::Real;
using nn::Tensor;
using nn::Vector;

/// Variance schedule beta_t with alpha_t = 1 - beta_t, alpha_bar_t the running
/// product of alphas and sigma_t = sqrt(beta_t). Steps are 1-based.
template <typename Scalar = double>
struct DiffusionSchedule {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vec betas;
  Vec alphas;
  Vec alpha_bars;
  Vec sigmas;
  Scalar beta_start = 0;
  Scalar beta_end = 0;

  int steps() const { return static_cast<int>(betas.size()); }
  Scalar beta(int t) const { return betas[t - 1]; }
  Scalar alpha(int t) const { return alphas[t - 1]; }
  Scalar alpha_bar(int t) const { return alpha_bars[t - 1]; }
  Scalar sigma(int t) const { return sigmas[t - 1]; }

  void check_step(int t) const {
    if (t < 1 || t > steps()) {
      throw ArgumentError("diffusion step " + std::to_string(t) + " outside [1, " +
                          std::to_string(steps()) + "]");
    }
  }
};

/// beta_t = beta_start + (t - 1) / (T - 1) * (beta_end - beta_start).
template <typename Scalar = double>
DiffusionSchedule<Scalar> linear_beta_schedule(int steps, Scalar beta_start, Scalar beta_end) {
  if (steps < 1) throw ArgumentError("schedule: T must be >= 1");
  if (!(beta_start > 0 && beta_start <= beta_end && beta_end < 1)) {
    throw ArgumentError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  DiffusionSchedule<Scalar> s;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.betas.resize(steps);
  for (int i = 0; i < steps; ++i) {
    s.betas[i] = steps == 1 ? beta_start
                            : beta_start + Scalar(i) / Scalar(steps - 1) * (beta_end - beta_start);
  }
  // Exact endpoint regardless of rounding in the interpolation.
  if (steps > 1) s.betas[steps - 1] = beta_end;
  s.alphas = Scalar(1) - s.betas.array();
  s.alpha_bars.resize(steps);
  Scalar running = 1;
  for (int i = 0; i < steps; ++i) {
    running *= s.alphas[i];
    s.alpha_bars[i] = running;
  }
  s.sigmas = s.betas.array().sqrt();
  return s;
}

/// Closed-form forward noising sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
template <typename DerivedZ, typename DerivedE, typename Scalar>
auto q_sample(const Eigen::MatrixBase<DerivedZ>& z0, int t, const Eigen::MatrixBase<DerivedE>& eps,
              const DiffusionSchedule<Scalar>& schedule) {
  schedule.check_step(t);
  if (z0.rows() != eps.rows() || z0.cols() != eps.cols()) {
    throw ShapeError("q_sample: noise shape differs from latent shape");
  }
  const Scalar ab = schedule.alpha_bar(t);
  return (std::sqrt(ab) * z0 + std::sqrt(Scalar(1) - ab) * eps).eval();
}

/// One ancestral step
///   z_{t-1} = (z_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t * noise,
/// with the noise term dropped at t = 1.
template <typename DerivedZ, typename DerivedE, typename DerivedN, typename Scalar>
auto reverse_step(const Eigen::MatrixBase<DerivedZ>& z_t, const Eigen::MatrixBase<DerivedE>& eps_hat,
                  const Eigen::MatrixBase<DerivedN>& noise, int t,
                  const DiffusionSchedule<Scalar>& schedule) {
  schedule.check_step(t);
  const Scalar coef = schedule.beta(t) / std::sqrt(Scalar(1) - schedule.alpha_bar(t));
  const Scalar noise_scale = t > 1 ? schedule.sigma(t) : Scalar(0);
  return ((z_t - coef * eps_hat) / std::sqrt(schedule.alpha(t)) + noise_scale * noise).eval();
}

Tensor q_sample(const Tensor& z0, int t, const Tensor& eps, const DiffusionSchedule<Real>& schedule);

/// Per-channel affine map between VQ latents and the unit-variance space
/// the diffusion runs in.
struct LatentStats {
  Vector mean;  // per channel
  Vector std;   // per channel, > 0

  static LatentStats identity(Index channels);
  static LatentStats fit(const Tensor& latents);
  Tensor normalize(const Tensor& z) const;
  Tensor denormalize(const Tensor& z) const;
};

/// Schedule + noise predictor + latent statistics.
class DiffusionModel {
 public:
  /// Latents are [d, m, m] with d = latent_channels, m = latent_side.
  DiffusionModel(DiffusionSchedule<Real> schedule, std::unique_ptr<NoisePredictor> denoiser,
                 int class_count, Index latent_channels, Index latent_side);

  const DiffusionSchedule<Real>& schedule() const { return schedule_; }
  NoisePredictor& denoiser() { return *denoiser_; }
  int class_count() const { return class_count_; }
  Index latent_channels() const { return latent_channels_; }
  Index latent_side() const { return latent_side_; }
  const LatentStats& stats() const { return stats_; }
  void set_stats(LatentStats stats) { stats_ = std::move(stats); }

  /// eps_theta(z_t, t, y) with range checks on t and y.
  Tensor predict_noise(const Tensor& z_t, std::span<const int> steps, std::span<const int> labels);

  void save(nn::Checkpoint& ckpt);
  /// Requires the checkpoint to hold a U-Net denoiser.
  static DiffusionModel load(const nn::Checkpoint& ckpt);

 private:
  DiffusionSchedule<Real> schedule_;
  std::unique_ptr<NoisePredictor> denoiser_;
  int class_count_;
  Index latent_channels_;
  Index latent_side_;
  LatentStats stats_;
};

/// i.i.d. N(0, 1) entries drawn in storage order.
Tensor standard_normal(const Tensor::Shape& shape, nn::Rng& rng);

struct DdpmLoss {
  Real value = 0;
  std::vector<int> steps;  // t drawn per sample
  Tensor noise;            // eps drawn per sample
  Tensor grad;             // d(loss)/d(prediction)
};

/// Draws t ~ U{1..T} and eps ~ N(0, I) per sample, noises z0 and returns the
/// mean squared error between eps and the prediction. Call
/// `model.denoiser().backward(loss.grad)` to backpropagate.
DdpmLoss ddpm_loss(DiffusionModel& model, const Tensor& z0, std::span<const int> labels,
                   nn::Rng& rng);

/// One reverse step at a shared t for every batch element.
Tensor p_sample_step(DiffusionModel& model, const Tensor& z_t, int t, std::span<const int> labels,
                     nn::Rng& rng);

/// Ancestral sampling from N(0, I) through T reverse steps. Latents are
/// returned denormalized, each shaped [d, m, m].
std::vector<Tensor> sample(DiffusionModel& model, int label, int count, nn::Rng& rng);

struct DdpmTrainConfig {
  int epochs = 1000;
  int batch_size = 32;
  Real learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct DdpmTrainLog {
  std::vector<Real> epoch_loss;
};

/// Fits latent statistics on the training latents (quantized once up front)
/// and minimizes ddpm_loss with Adam.
DdpmTrainLog train_ddpm(DiffusionModel& model, vq::VqVaeModel& vqvae, const LabeledDataset& dataset,
                        const DdpmTrainConfig& config);
/// Same, on precomputed quantized latents [N, d, m, m].
DdpmTrainLog train_ddpm_on_latents(DiffusionModel& model, const Tensor& latents,
                                   std::span<const int> labels, const DdpmTrainConfig& config);

/// Quantized latents [N, d, m, m] of every spectrum in the dataset.
Tensor quantized_latents(vq::VqVaeModel& vqvae, const LabeledDataset& dataset);

}  // namespace spectradiff::diffusion
