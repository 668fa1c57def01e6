#pragma once

#include "spectradiff/figure.hpp"
#include "spectradiff/nn/adam.hpp"
#include "spectradiff/nn/checkpoint.hpp"
#include "spectradiff/nn/layers.hpp"
#include "spectradiff/spectra_io.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spectradiff::vq {

using nn::Index;
using nn::Real;
using nn::Tensor;

/// N learnable d-dimensional embedding vectors, one per row.
struct Codebook {
  Eigen::MatrixXd embeddings;

  Index size() const { return embeddings.rows(); }
  Index dim() const { return embeddings.cols(); }
};

/// m x m grid of d-dimensional latents stored channel-first as [d, m, m].
/// `indices` (m x m) is present exactly when the grid is quantized.
struct LatentGrid {
  Tensor values;
  bool quantized = false;
  std::optional<Eigen::MatrixXi> indices;

  Index dim() const { return values.dim(0); }
  Index side() const { return values.dim(1); }
};

struct QuantizedBatch {
  Tensor values;             // [N, d, m, m], rows copied from the codebook
  std::vector<int> indices;  // N * m * m, position-major (n, h, w)
};

/// Nearest codebook row under squared Euclidean distance for every spatial
/// position of z [N, d, m, m]; ties go to the lowest index.
QuantizedBatch quantize_batch(const Tensor& z, const Eigen::MatrixXd& codebook);

LatentGrid quantize(const LatentGrid& z_e, const Codebook& codebook);

/// The three terms of the VQ objective and their weighted total.
struct VqLossParts {
  Real total = 0;
  Real reconstruction = 0;  // mean (figure - reconstruction)^2
  Real codebook = 0;        // mean (sg[z_e] - z_q)^2
  Real commitment = 0;      // mean (z_e - sg[z_q])^2, weighted by zeta in total
};

VqLossParts vq_loss(const Tensor& figure, const Tensor& reconstruction, const Tensor& z_e,
                    const Tensor& z_q, Real zeta);

struct VqVaeConfig {
  Index figure_side = kDefaultFigureSide;  // M
  Index latent_dim = 16;                   // d
  Index codebook_size = 1024;              // N
  Real commitment = 0.25;                  // zeta
  Index hidden1 = 32;
  Index hidden2 = 64;

  Index latent_side() const { return figure_side / 4; }
  void validate() const;
};

/// Encoder Conv(k4,s2) -> Conv(k4,s2) -> Conv(k3,s1) to d channels with ReLU
/// between; decoder mirrors it with transposed convolutions and a sigmoid
/// head. Networks see pixels scaled to [0, 1].
class VqVaeModel {
 public:
  explicit VqVaeModel(VqVaeConfig config, std::uint64_t seed = 0);

  const VqVaeConfig& config() const { return config_; }

  LatentGrid encode(const RamanFigure<double>& figure);
  LatentGrid quantize(const LatentGrid& z_e) const;
  /// Pixels in [0, 255]; the normalization pair is attached as given.
  RamanFigure<double> decode(const LatentGrid& z, Real norm_min = 0, Real norm_max = 1);

  /// Batched forward passes over pixels in [0, 1] shaped [N, 1, M, M].
  Tensor encode_batch(const Tensor& pixels01);
  Tensor decode_batch(const Tensor& latents);
  QuantizedBatch quantize_batch(const Tensor& z_e) const;

  /// Loss of one batch with gradients accumulated into the parameters.
  /// The quantizer is bypassed by a straight-through copy of the decoder
  /// input gradient to the encoder output.
  VqLossParts loss_and_grad(const Tensor& pixels01);
  /// Same loss without touching gradients.
  VqLossParts evaluate(const Tensor& pixels01);

  Codebook codebook() const;
  Tensor& codebook_tensor() { return codebook_.value; }

  nn::ParamStore parameters();
  nn::ParamStore encoder_parameters();
  nn::ParamStore decoder_parameters();

  /// Seeds codebook rows from encoder outputs of `pixels01` (plus a small
  /// jitter) so that training starts with live codes.
  void init_codebook_from(const Tensor& pixels01, nn::Rng& rng);
  bool codebook_seeded() const { return codebook_seeded_; }

  void save(nn::Checkpoint& ckpt);
  static VqVaeModel load(const nn::Checkpoint& ckpt);

 private:
  Tensor encoder_backward(const Tensor& grad);
  Tensor decoder_backward(const Tensor& grad);

  VqVaeConfig config_;
  nn::Conv2d enc1_, enc2_, enc3_;
  nn::Activation enc_act1_{nn::ActivationKind::ReLU}, enc_act2_{nn::ActivationKind::ReLU};
  nn::Conv2d dec1_;
  nn::ConvTranspose2d dec2_, dec3_;
  nn::Activation dec_act1_{nn::ActivationKind::ReLU}, dec_act2_{nn::ActivationKind::ReLU};
  nn::Activation dec_out_{nn::ActivationKind::Sigmoid};
  nn::Parameter codebook_;  // [N, d]
  bool codebook_seeded_ = false;
};

/// Stacks figures into [N, 1, M, M] with pixels divided by 255.
Tensor figures_to_batch(const std::vector<RamanFigure<double>>& figures);
std::vector<RamanFigure<double>> dataset_figures(const LabeledDataset& dataset, Index side);

struct VqTrainConfig {
  int epochs = 600;
  int batch_size = 32;
  Real learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool seed_codebook_from_data = true;
};

struct VqEpochStats {
  int epoch = 0;
  VqLossParts mean;
  int codes_used = 0;
};

struct VqTrainLog {
  std::vector<VqEpochStats> epochs;
  Real initial_reconstruction_mse = 0;
  Real final_reconstruction_mse = 0;
};

/// Minibatch Adam over the VQ objective. Throws TrainingError with
/// epoch/batch context on a non-finite loss.
VqTrainLog train_vqvae(VqVaeModel& model, const std::vector<RamanFigure<double>>& figures,
                       const VqTrainConfig& config);

/// Number of distinct codebook entries selected over the given figures.
int codebook_usage(VqVaeModel& model, const Tensor& pixels01);

}  // namespace spectradiff::vq
