#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spectradiff {

/// A labeled intensity sequence on an ascending wavenumber grid.
///
/// Invariants are checked on construction: at least two points, strictly
/// ascending wavenumbers, finite intensities and equal lengths.
class Spectrum {
 public:
  Spectrum(Eigen::VectorXd wavenumbers, Eigen::VectorXd intensities,
           std::optional<int> label = std::nullopt);

  const Eigen::VectorXd& wavenumbers() const { return wavenumbers_; }
  const Eigen::VectorXd& intensities() const { return intensities_; }
  std::optional<int> label() const { return label_; }
  Eigen::Index size() const { return intensities_.size(); }

  /// Same grid and label, new intensities.
  Spectrum with_intensities(Eigen::VectorXd intensities) const;

 private:
  Eigen::VectorXd wavenumbers_;
  Eigen::VectorXd intensities_;
  std::optional<int> label_;
};

/// Spectra sharing one wavenumber grid, labeled by index into class_names.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Eigen::VectorXd grid, std::vector<std::string> class_names);

  void add(Spectrum s);

  const Eigen::VectorXd& grid() const { return grid_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<Spectrum>& spectra() const { return spectra_; }
  int class_count() const { return static_cast<int>(class_names_.size()); }
  std::size_t size() const { return spectra_.size(); }
  bool empty() const { return spectra_.empty(); }
  const Spectrum& operator[](std::size_t i) const { return spectra_[i]; }

  /// Row-per-spectrum intensity matrix.
  Eigen::MatrixXd intensity_matrix() const;
  std::vector<int> labels() const;
  std::vector<std::size_t> class_counts() const;

  /// Subset holding only the spectra of one class (class registry kept).
  LabeledDataset filter_class(int label) const;
  /// Spectra of both datasets; class registries and grids must agree.
  LabeledDataset merged(const LabeledDataset& other) const;

  /// Same spectra with labels mapped onto another registry that contains
  /// every class name of this one.
  LabeledDataset relabeled(const std::vector<std::string>& class_names) const;

  /// Index of a class name, or nullopt.
  std::optional<int> find_class(const std::string& name) const;

 private:
  Eigen::VectorXd grid_;
  std::vector<std::string> class_names_;
  std::vector<Spectrum> spectra_;
};

bool operator==(const LabeledDataset& a, const LabeledDataset& b);

/// Reads `wavenumber_1..wavenumber_K,label` CSV. The header cells carry the
/// grid values; labels are assigned indices in first-appearance order.
LabeledDataset load_csv(const std::filesystem::path& path);
LabeledDataset parse_csv(const std::string& text);

/// Writes the format read by load_csv with shortest round-trip floats.
void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path);
std::string format_csv(const LabeledDataset& dataset);

/// Shortest decimal representation that parses back to the same double.
std::string format_real(double value);

/// Parameters of the Gaussian-peak surrogate dataset.
struct SynthSpec {
  int class_count = 4;
  int peaks_per_class = 6;
  std::pair<double, double> peak_center_range{450.0, 1750.0};
  std::pair<double, double> peak_width_range{8.0, 30.0};
  double noise_sigma = 0.05;
  int samples_per_class = 10;
  std::uint64_t seed = 7;
  // Grid on which spectra are sampled.
  int grid_points = 1000;
  std::pair<double, double> wavenumber_range{400.0, 1800.0};

  void validate() const;
};

/// Deterministic class-conditional surrogate spectra: each class is a fixed
/// mixture of Gaussian peaks, each sample adds i.i.d. Gaussian noise.
LabeledDataset generate_synthetic(const SynthSpec& spec);

/// Parses `key = value` lines (TOML-style subset) into a SynthSpec.
SynthSpec parse_synth_spec(const std::string& text);

}  // namespace spectradiff
