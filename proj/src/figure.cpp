#include "spectradiff/figure.hpp"

#include <algorithm>
#include <fstream>

namespace spectradiff {

Eigen::VectorXd interpolate_spectrum(const Spectrum& s, Eigen::Index target_len) {
  return resample_linear(s.intensities(), target_len);
}

RamanFigure<double> spectrum_figure(const Spectrum& s, Eigen::Index side) {
  return spectrum_to_figure(interpolate_spectrum(s, side * side), side);
}

std::string format_pgm(const RamanFigure<double>& fig) {
  const auto side = fig.side();
  std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  for (Eigen::Index j = 0; j < side; ++j) {
    for (Eigen::Index k = 0; k < side; ++k) {
      const double v = std::clamp(std::round(fig.pixels(j, k)), 0.0, 255.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
  }
  return out;
}

void write_pgm(const RamanFigure<double>& fig, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_pgm(fig);
}

}  // namespace spectradiff
