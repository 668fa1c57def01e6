#pragma once

#include "spectradiff/diffusion.hpp"
#include "spectradiff/nn/checkpoint.hpp"
#include "spectradiff/spectra_io.hpp"
#include "spectradiff/vqvae.hpp"

#include <string>
#include <vector>

namespace spectradiff {

/// What the sampler needs to turn decoded figures back into spectra: the
/// output grid, the class registry and, per class, the mean (Min, Max) pair
/// of the training figures used to undo the [0, 255] scaling.
struct GenerationContext {
  Eigen::VectorXd grid;
  std::vector<std::string> class_names;
  Eigen::VectorXd class_norm_min;
  Eigen::VectorXd class_norm_max;
  bool requantize = true;

  static GenerationContext from_dataset(const LabeledDataset& dataset, Eigen::Index figure_side);

  void save(nn::Checkpoint& ckpt) const;
  static GenerationContext load(const nn::Checkpoint& ckpt);
};

/// Sampling end to end: diffusion in latent space, optional snap to the
/// codebook, decoding, figure-to-spectrum inversion and resampling onto the
/// context grid. Returns `count` spectra labeled `label`.
LabeledDataset generate_spectra(diffusion::DiffusionModel& model, vq::VqVaeModel& vqvae,
                                const GenerationContext& context, int label, int count,
                                nn::Rng& rng);

/// Decodes one latent [d, m, m] into a spectrum on the context grid.
Spectrum decode_latent(vq::VqVaeModel& vqvae, const GenerationContext& context,
                       const nn::Tensor& latent, int label);

}  // namespace spectradiff
