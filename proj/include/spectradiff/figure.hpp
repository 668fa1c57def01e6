#pragma once

#include "spectradiff/errors.hpp"
#include "spectradiff/spectra_io.hpp"

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <string>

namespace spectradiff {

/// Default figure side; a 32x32 figure holds a length-1024 spectrum.
inline constexpr int kDefaultFigureSide = 32;

inline bool is_power_of_two(Eigen::Index n) { return n >= 2 && (n & (n - 1)) == 0; }

/// M x M grayscale encoding of a length-M^2 spectrum.
///
/// Pixels stay real-valued in [0, 255]; together with (norm_min, norm_max)
/// they invert exactly back to the source signal. A constant source signal is
/// flagged `degenerate` and stored as an all-zero figure.
template <typename Scalar = double>
struct RamanFigure {
  using Pixels = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Pixels pixels;
  Scalar norm_min = 0;
  Scalar norm_max = 1;
  bool degenerate = false;

  Eigen::Index side() const { return pixels.rows(); }
};

/// Linear resampling over a uniform parameterization of the source index
/// range. Endpoints are reproduced exactly and equal lengths are a no-op.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> resample_linear(
    const Eigen::MatrixBase<Derived>& values, Eigen::Index target_len) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  if (target_len < 2) throw ArgumentError("resample: target length must be >= 2");
  if (n < 2) throw ArgumentError("resample: source length must be >= 2");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(target_len);
  for (Eigen::Index i = 0; i < target_len; ++i) {
    // i * (n - 1) is exact; the quotient is exact whenever it is an integer.
    const Scalar pos = Scalar(i * (n - 1)) / Scalar(target_len - 1);
    Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
    if (lo >= n - 1) {
      out[i] = values(n - 1);
      continue;
    }
    const Scalar frac = pos - Scalar(lo);
    out[i] = frac == Scalar(0) ? values(lo) : values(lo) + frac * (values(lo + 1) - values(lo));
  }
  return out;
}

/// Resamples a spectrum's intensities to `target_len` points.
Eigen::VectorXd interpolate_spectrum(const Spectrum& s, Eigen::Index target_len);

/// Row-major fill of an M x M figure: pixel (j, k) holds the sample at
/// j * M + k, min-max scaled to [0, 255].
template <typename Derived>
RamanFigure<typename Derived::Scalar> spectrum_to_figure(
    const Eigen::MatrixBase<Derived>& signal, Eigen::Index side) {
  using Scalar = typename Derived::Scalar;
  if (!is_power_of_two(side)) {
    throw ArgumentError("figure: side " + std::to_string(side) + " is not a power of two >= 2");
  }
  if (signal.size() != side * side) {
    throw ArgumentError("figure: signal length " + std::to_string(signal.size()) +
                        " does not equal side^2 = " + std::to_string(side * side));
  }
  RamanFigure<Scalar> fig;
  fig.pixels.resize(side, side);
  fig.norm_min = signal.minCoeff();
  fig.norm_max = signal.maxCoeff();
  if (fig.norm_max == fig.norm_min) {
    fig.pixels.setZero();
    fig.norm_max = fig.norm_min + Scalar(1);
    fig.degenerate = true;
    return fig;
  }
  const Scalar range = fig.norm_max - fig.norm_min;
  for (Eigen::Index j = 0; j < side; ++j) {
    for (Eigen::Index k = 0; k < side; ++k) {
      fig.pixels(j, k) = (signal(j * side + k) - fig.norm_min) / range * Scalar(255);
    }
  }
  return fig;
}

/// Inverse of spectrum_to_figure.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> figure_to_spectrum(const RamanFigure<Scalar>& fig) {
  const Eigen::Index side = fig.side();
  if (fig.pixels.cols() != side || !is_power_of_two(side)) {
    throw ArgumentError("figure: pixels must be square with power-of-two side");
  }
  if (!(fig.norm_max >= fig.norm_min)) throw ArgumentError("figure: norm_max < norm_min");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(side * side);
  if (fig.degenerate) {
    out.setConstant(fig.norm_min);
    return out;
  }
  const Scalar range = fig.norm_max - fig.norm_min;
  for (Eigen::Index j = 0; j < side; ++j) {
    for (Eigen::Index k = 0; k < side; ++k) {
      out(j * side + k) = fig.pixels(j, k) / Scalar(255) * range + fig.norm_min;
    }
  }
  return out;
}

/// Interpolates a spectrum to side^2 points and encodes it.
RamanFigure<double> spectrum_figure(const Spectrum& s, Eigen::Index side = kDefaultFigureSide);

/// 8-bit binary PGM of the figure for inspection (lossy).
void write_pgm(const RamanFigure<double>& fig, const std::filesystem::path& path);
std::string format_pgm(const RamanFigure<double>& fig);

}  // namespace spectradiff
