#include "spectradiff/augment.hpp"

#include "spectradiff/errors.hpp"

#include <cmath>

namespace spectradiff::augment {

void DaParams::validate() const {
  if (!(noise_sigma >= 0)) throw ArgumentError("augment: noise_sigma must be >= 0");
  if (!(blur_sigma_range.first >= 0 && blur_sigma_range.first <= blur_sigma_range.second)) {
    throw ArgumentError("augment: blur sigma range must be ordered and non-negative");
  }
  if (!(scale_range.first > 0 && scale_range.first <= scale_range.second)) {
    throw ArgumentError("augment: scale range must be positive and ordered");
  }
}

Eigen::VectorXd gaussian_kernel(double sigma) {
  if (!(sigma > 0)) return Eigen::VectorXd::Ones(1);
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Eigen::VectorXd k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
  }
  return k / k.sum();
}

Eigen::VectorXd gaussian_blur(const Eigen::VectorXd& values, double sigma) {
  if (!(sigma > 0)) return values;
  const Eigen::VectorXd kernel = gaussian_kernel(sigma);
  const Eigen::Index n = values.size();
  const Eigen::Index radius = kernel.size() / 2;
  // Index into the even-symmetric periodic extension x[-1 - j] = x[j].
  auto reflect = [n](Eigen::Index j) {
    const Eigen::Index period = 2 * n;
    j %= period;
    if (j < 0) j += period;
    return j < n ? j : period - 1 - j;
  };
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0;
    for (Eigen::Index k = -radius; k <= radius; ++k) acc += kernel[k + radius] * values[reflect(i + k)];
    out[i] = acc;
  }
  return out;
}

Spectrum augment_da(const Spectrum& s, const DaParams& params, std::mt19937_64& rng) {
  params.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](std::pair<double, double> r) { return r.first + (r.second - r.first) * unit(rng); };
  const double scale = draw(params.scale_range);
  const double blur = draw(params.blur_sigma_range);
  const Eigen::VectorXd& x = s.intensities();
  Eigen::VectorXd out = gaussian_blur(scale * x, blur);
  const double noise = params.noise_sigma * (x.maxCoeff() - x.minCoeff());
  if (noise > 0) {
    std::normal_distribution<double> normal(0.0, noise);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += normal(rng);
  }
  return s.with_intensities(std::move(out));
}

LabeledDataset generate_da(const LabeledDataset& dataset, int per_class_count,
                           const DaParams& params, std::uint64_t seed) {
  params.validate();
  if (per_class_count < 0) throw ArgumentError("augment: per_class_count must be >= 0");
  LabeledDataset out(dataset.grid(), dataset.class_names());
  if (per_class_count == 0) return out;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(dataset.class_count()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    members[static_cast<std::size_t>(*dataset[i].label())].push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (int c = 0; c < dataset.class_count(); ++c) {
    const auto& pool = members[static_cast<std::size_t>(c)];
    if (pool.empty()) {
      throw ArgumentError("augment: class '" + dataset.class_names()[static_cast<std::size_t>(c)] +
                          "' has no source spectra");
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int i = 0; i < per_class_count; ++i) {
      out.add(augment_da(dataset[pool[pick(rng)]], params, rng));
    }
  }
  return out;
}

}  // namespace spectradiff::augment
