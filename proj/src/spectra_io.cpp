#include "spectradiff/spectra_io.hpp"

#include "spectradiff/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace spectradiff {

Spectrum::Spectrum(Eigen::VectorXd wavenumbers, Eigen::VectorXd intensities,
                   std::optional<int> label)
    : wavenumbers_(std::move(wavenumbers)),
      intensities_(std::move(intensities)),
      label_(label) {
  if (wavenumbers_.size() != intensities_.size()) {
    throw ArgumentError("spectrum: " + std::to_string(wavenumbers_.size()) +
                        " wavenumbers but " +
                        std::to_string(intensities_.size()) + " intensities");
  }
  if (intensities_.size() < 2) {
    throw ArgumentError("spectrum: need at least 2 points");
  }
  for (Eigen::Index i = 1; i < wavenumbers_.size(); ++i) {
    if (!(wavenumbers_[i] > wavenumbers_[i - 1])) {
      throw ArgumentError("spectrum: wavenumbers not strictly ascending at index " +
                          std::to_string(i));
    }
  }
  if (!intensities_.allFinite()) {
    throw ArgumentError("spectrum: non-finite intensity");
  }
  if (label_ && *label_ < 0) {
    throw ArgumentError("spectrum: negative label");
  }
}

Spectrum Spectrum::with_intensities(Eigen::VectorXd intensities) const {
  return Spectrum(wavenumbers_, std::move(intensities), label_);
}

LabeledDataset::LabeledDataset(Eigen::VectorXd grid,
                               std::vector<std::string> class_names)
    : grid_(std::move(grid)), class_names_(std::move(class_names)) {}

void LabeledDataset::add(Spectrum s) {
  if (s.wavenumbers().size() != grid_.size() || s.wavenumbers() != grid_) {
    throw ArgumentError("dataset: spectrum grid does not match dataset grid");
  }
  if (!s.label() || *s.label() >= class_count()) {
    throw ArgumentError("dataset: spectrum label outside class registry");
  }
  spectra_.push_back(std::move(s));
}

Eigen::MatrixXd LabeledDataset::intensity_matrix() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(spectra_.size()), grid_.size());
  for (std::size_t i = 0; i < spectra_.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = spectra_[i].intensities().transpose();
  }
  return out;
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(spectra_.size());
  for (const auto& s : spectra_) out.push_back(*s.label());
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names_.size(), 0);
  for (const auto& s : spectra_) ++counts[static_cast<std::size_t>(*s.label())];
  return counts;
}

LabeledDataset LabeledDataset::filter_class(int label) const {
  LabeledDataset out(grid_, class_names_);
  for (const auto& s : spectra_) {
    if (*s.label() == label) out.spectra_.push_back(s);
  }
  return out;
}

LabeledDataset LabeledDataset::merged(const LabeledDataset& other) const {
  if (other.class_names_ != class_names_) {
    throw ArgumentError("merge: class registries differ");
  }
  if (other.grid_.size() != grid_.size() || other.grid_ != grid_) {
    throw ArgumentError("merge: wavenumber grids differ");
  }
  LabeledDataset out = *this;
  out.spectra_.insert(out.spectra_.end(), other.spectra_.begin(), other.spectra_.end());
  return out;
}

LabeledDataset LabeledDataset::relabeled(const std::vector<std::string>& class_names) const {
  LabeledDataset out(grid_, class_names);
  std::vector<int> map;
  for (const auto& name : class_names_) {
    auto idx = out.find_class(name);
    if (!idx) throw ArgumentError("relabel: class '" + name + "' missing from target registry");
    map.push_back(*idx);
  }
  for (const auto& s : spectra_) {
    out.add(Spectrum(s.wavenumbers(), s.intensities(), map[static_cast<std::size_t>(*s.label())]));
  }
  return out;
}

std::optional<int> LabeledDataset::find_class(const std::string& name) const {
  auto it = std::find(class_names_.begin(), class_names_.end(), name);
  if (it == class_names_.end()) return std::nullopt;
  return static_cast<int>(it - class_names_.begin());
}

bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.class_names() != b.class_names()) return false;
  if (a.grid().size() != b.grid().size() || a.grid() != b.grid()) return false;
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].label() != b[i].label()) return false;
    if (a[i].intensities() != b[i].intensities()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_real(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

LabeledDataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw FormatError("csv: missing header row");
  ++line_no;
  auto header = split_fields(line);
  if (header.empty() || trim(header.back()) != "label") {
    throw FormatError("csv: header must end with a 'label' column");
  }
  const std::size_t k = header.size() - 1;
  Eigen::VectorXd grid(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    auto v = parse_real(header[i]);
    if (!v) {
      throw ParseError("csv: row 1: header cell " + std::to_string(i + 1) +
                       " is not a wavenumber");
    }
    grid[static_cast<Eigen::Index>(i)] = *v;
  }
  for (Eigen::Index i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw FormatError("csv: wavenumber grid not strictly ascending at column " +
                        std::to_string(i + 1));
    }
  }

  std::vector<std::string> names;
  std::unordered_map<std::string, int> index;
  std::vector<std::pair<Eigen::VectorXd, int>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != k + 1) {
      throw ParseError("csv: row " + std::to_string(line_no) + ": expected " +
                       std::to_string(k + 1) + " fields, got " +
                       std::to_string(fields.size()));
    }
    Eigen::VectorXd values(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      auto v = parse_real(fields[i]);
      if (!v) {
        throw ParseError("csv: row " + std::to_string(line_no) + ": field " +
                         std::to_string(i + 1) + " is not numeric");
      }
      values[static_cast<Eigen::Index>(i)] = *v;
    }
    std::string name(trim(fields.back()));
    if (name.empty()) {
      throw ParseError("csv: row " + std::to_string(line_no) + ": empty label");
    }
    auto [it, inserted] = index.emplace(name, static_cast<int>(names.size()));
    if (inserted) names.push_back(name);
    rows.emplace_back(std::move(values), it->second);
  }

  LabeledDataset out(grid, names);
  for (auto& [values, label] : rows) {
    out.add(Spectrum(grid, std::move(values), label));
  }
  return out;
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_csv(const LabeledDataset& dataset) {
  std::string out;
  for (Eigen::Index i = 0; i < dataset.grid().size(); ++i) {
    out += format_real(dataset.grid()[i]);
    out += ',';
  }
  out += "label\n";
  for (const auto& s : dataset.spectra()) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      out += format_real(s.intensities()[i]);
      out += ',';
    }
    out += dataset.class_names()[static_cast<std::size_t>(*s.label())];
    out += '\n';
  }
  return out;
}

void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_csv(dataset);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic surrogate data

void SynthSpec::validate() const {
  if (class_count < 2) throw ArgumentError("synth: class_count must be >= 2");
  if (samples_per_class < 1) throw ArgumentError("synth: samples_per_class must be >= 1");
  if (peaks_per_class < 1) throw ArgumentError("synth: peaks_per_class must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ArgumentError("synth: noise_sigma must be >= 0");
  if (grid_points < 2) throw ArgumentError("synth: grid_points must be >= 2");
  if (!(peak_center_range.first <= peak_center_range.second)) {
    throw ArgumentError("synth: peak_center_range low > high");
  }
  if (!(peak_width_range.first > 0.0 && peak_width_range.first <= peak_width_range.second)) {
    throw ArgumentError("synth: peak_width_range must be positive and ordered");
  }
  if (!(wavenumber_range.first < wavenumber_range.second)) {
    throw ArgumentError("synth: wavenumber_range low >= high");
  }
}

LabeledDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](std::pair<double, double> r) {
    return r.first + (r.second - r.first) * unit(rng);
  };

  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(
      spec.grid_points, spec.wavenumber_range.first, spec.wavenumber_range.second);

  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> templates;
  for (int c = 0; c < spec.class_count; ++c) {
    names.push_back("class_" + std::to_string(c));
    Eigen::VectorXd clean = Eigen::VectorXd::Zero(grid.size());
    for (int p = 0; p < spec.peaks_per_class; ++p) {
      const double center = uniform(spec.peak_center_range);
      const double width = uniform(spec.peak_width_range);
      const double amplitude = 0.2 + 0.8 * unit(rng);
      clean.array() += amplitude *
          (-(grid.array() - center).square() / (2.0 * width * width)).exp();
    }
    templates.push_back(std::move(clean));
  }

  LabeledDataset out(grid, names);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int c = 0; c < spec.class_count; ++c) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Eigen::VectorXd values = templates[static_cast<std::size_t>(c)];
      if (spec.noise_sigma > 0.0) {
        for (Eigen::Index j = 0; j < values.size(); ++j) {
          values[j] += spec.noise_sigma * normal(rng);
        }
      }
      out.add(Spectrum(grid, std::move(values), c));
    }
  }
  return out;
}

namespace {

std::pair<double, double> parse_range(const std::string& key, std::string_view value) {
  value = trim(value);
  if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
    throw ParseError("synth spec: " + key + " must be a [low, high] array");
  }
  auto parts = split_fields(value.substr(1, value.size() - 2));
  if (parts.size() != 2) throw ParseError("synth spec: " + key + " needs two values");
  auto lo = parse_real(parts[0]);
  auto hi = parse_real(parts[1]);
  if (!lo || !hi) throw ParseError("synth spec: " + key + " has non-numeric bounds");
  return {*lo, *hi};
}

double parse_scalar(const std::string& key, std::string_view value) {
  auto v = parse_real(value);
  if (!v) throw ParseError("synth spec: " + key + " is not numeric");
  return *v;
}

int parse_int(const std::string& key, std::string_view value) {
  double v = parse_scalar(key, value);
  if (v != std::floor(v)) throw ParseError("synth spec: " + key + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;  // blank or table header
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("synth spec: line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (key == "class_count") spec.class_count = parse_int(key, value);
    else if (key == "peaks_per_class") spec.peaks_per_class = parse_int(key, value);
    else if (key == "samples_per_class") spec.samples_per_class = parse_int(key, value);
    else if (key == "grid_points") spec.grid_points = parse_int(key, value);
    else if (key == "noise_sigma") spec.noise_sigma = parse_scalar(key, value);
    else if (key == "seed") {
      std::uint64_t v = 0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw ParseError("synth spec: seed must be a non-negative integer");
      }
      spec.seed = v;
    } else if (key == "peak_center_range") spec.peak_center_range = parse_range(key, value);
    else if (key == "peak_width_range") spec.peak_width_range = parse_range(key, value);
    else if (key == "wavenumber_range") spec.wavenumber_range = parse_range(key, value);
    else throw ParseError("synth spec: line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace spectradiff
