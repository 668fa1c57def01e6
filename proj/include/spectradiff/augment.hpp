#pragma once

#include "spectradiff/spectra_io.hpp"

#include <cstdint>
#include <random>
#include <utility>

namespace spectradiff::augment {

/// Magnitudes of the classical perturbation baseline. A blur range of
/// [0, 0] disables blurring.
struct DaParams {
  double noise_sigma = 0.02;  // relative to the spectrum's max - min
  std::pair<double, double> blur_sigma_range{0.5, 2.0};  // in samples
  std::pair<double, double> scale_range{0.9, 1.1};

  void validate() const;
};

/// Normalized Gaussian kernel truncated at ceil(3 sigma) taps per side.
Eigen::VectorXd gaussian_kernel(double sigma);

/// Convolution with a normalized symmetric kernel under half-sample
/// symmetric (reflective) extension; total intensity is preserved.
Eigen::VectorXd gaussian_blur(const Eigen::VectorXd& values, double sigma);

/// Scale by u ~ U(scale_range), blur with sigma ~ U(blur_sigma_range), then
/// add N(0, (noise_sigma * (max - min))^2) noise. Grid and label are kept.
Spectrum augment_da(const Spectrum& s, const DaParams& params, std::mt19937_64& rng);

/// `per_class_count` augmented spectra per class, sources drawn uniformly
/// within each class.
LabeledDataset generate_da(const LabeledDataset& dataset, int per_class_count,
                           const DaParams& params, std::uint64_t seed);

}  // namespace spectradiff::augment
