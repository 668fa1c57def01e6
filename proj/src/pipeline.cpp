#include "spectradiff/pipeline.hpp"

#include "spectradiff/errors.hpp"
#include "spectradiff/figure.hpp"

namespace spectradiff {

GenerationContext GenerationContext::from_dataset(const LabeledDataset& dataset,
                                                  Eigen::Index figure_side) {
  GenerationContext ctx;
  ctx.grid = dataset.grid();
  ctx.class_names = dataset.class_names();
  const auto classes = static_cast<Eigen::Index>(ctx.class_names.size());
  ctx.class_norm_min = Eigen::VectorXd::Zero(classes);
  ctx.class_norm_max = Eigen::VectorXd::Zero(classes);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(classes);
  for (const auto& s : dataset.spectra()) {
    const auto fig = spectrum_figure(s, figure_side);
    const int y = *s.label();
    ctx.class_norm_min[y] += fig.norm_min;
    ctx.class_norm_max[y] += fig.norm_max;
    counts[y] += 1;
  }
  for (Eigen::Index c = 0; c < classes; ++c) {
    if (counts[c] > 0) {
      ctx.class_norm_min[c] /= counts[c];
      ctx.class_norm_max[c] /= counts[c];
    } else {
      ctx.class_norm_max[c] = 1;
    }
  }
  return ctx;
}

void GenerationContext::save(nn::Checkpoint& ckpt) const {
  ckpt.meta["class_names"] = class_names;
  ckpt.meta["requantize"] = requantize;
  ckpt.tensors["context.grid"] = nn::Tensor({grid.size()}, grid);
  ckpt.tensors["context.class_norm_min"] = nn::Tensor({class_norm_min.size()}, class_norm_min);
  ckpt.tensors["context.class_norm_max"] = nn::Tensor({class_norm_max.size()}, class_norm_max);
}

GenerationContext GenerationContext::load(const nn::Checkpoint& ckpt) {
  GenerationContext ctx;
  ctx.class_names = ckpt.meta.at("class_names").get<std::vector<std::string>>();
  ctx.requantize = ckpt.meta.value("requantize", true);
  ctx.grid = ckpt.tensor("context.grid").flat();
  ctx.class_norm_min = ckpt.tensor("context.class_norm_min").flat();
  ctx.class_norm_max = ckpt.tensor("context.class_norm_max").flat();
  return ctx;
}

Spectrum decode_latent(vq::VqVaeModel& vqvae, const GenerationContext& context,
                       const nn::Tensor& latent, int label) {
  vq::LatentGrid grid{latent, false, std::nullopt};
  if (context.requantize) grid = vqvae.quantize(grid);
  const auto fig = vqvae.decode(grid, context.class_norm_min[label], context.class_norm_max[label]);
  const Eigen::VectorXd signal = figure_to_spectrum(fig);
  return Spectrum(context.grid, resample_linear(signal, context.grid.size()), label);
}

LabeledDataset generate_spectra(diffusion::DiffusionModel& model, vq::VqVaeModel& vqvae,
                                const GenerationContext& context, int label, int count,
                                nn::Rng& rng) {
  if (label < 0 || label >= static_cast<int>(context.class_names.size())) {
    throw ArgumentError("generate: label outside class registry");
  }
  LabeledDataset out(context.grid, context.class_names);
  for (const auto& z : diffusion::sample(model, label, count, rng)) {
    out.add(decode_latent(vqvae, context, z, label));
  }
  return out;
}

}  // namespace spectradiff
