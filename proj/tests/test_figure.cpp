#include "spectradiff/errors.hpp"
#include "spectradiff/figure.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace spectradiff;

namespace {

Eigen::VectorXd random_signal(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-50, 80);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("resampling to the same length is exact") {
  Eigen::VectorXd v = random_signal(37, 1);
  CHECK(resample_linear(v, 37) == v);
  Spectrum s(Eigen::VectorXd::LinSpaced(37, 0, 36), v);
  CHECK(interpolate_spectrum(s, 37) == v);
}

TEST_CASE("resampling [0, 1] to three points gives the midpoint") {
  CHECK(resample_linear(Eigen::Vector2d(0, 1), 3) == Eigen::Vector3d(0, 0.5, 1));
}

TEST_CASE("resampled sine stays within 1e-3 of the closed form") {
  const Eigen::Index n = 500, m = 1024;
  // Sample sin over [0, 2 pi] and compare with sin at the target positions.
  Eigen::VectorXd src = (Eigen::VectorXd::LinSpaced(n, 0, 2 * std::numbers::pi)).array().sin();
  Eigen::VectorXd out = resample_linear(src, m);
  Eigen::VectorXd truth = (Eigen::VectorXd::LinSpaced(m, 0, 2 * std::numbers::pi)).array().sin();
  CHECK((out - truth).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(out[0] == src[0]);
  CHECK(out[m - 1] == src[n - 1]);
}

TEST_CASE("resampling rejects short targets and sources") {
  CHECK_THROWS_AS(resample_linear(Eigen::Vector2d(0, 1), 1), ArgumentError);
  CHECK_THROWS_AS(resample_linear(Eigen::VectorXd::Zero(1), 4), ArgumentError);
}

TEST_CASE("ramp figure corners and first row") {
  Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(1024, 0, 1023);
  auto fig = spectrum_to_figure(ramp, 32);
  CHECK(fig.side() == 32);
  CHECK(fig.pixels(0, 0) == 0);
  CHECK(fig.pixels(31, 31) == 255);
  for (int k = 0; k < 32; ++k) CHECK(fig.pixels(0, k) == doctest::Approx(k * 255.0 / 1023.0));
  CHECK(fig.pixels(1, 0) == doctest::Approx(32 * 255.0 / 1023.0));
  CHECK(fig.norm_min == 0);
  CHECK(fig.norm_max == 1023);
  CHECK(!fig.degenerate);
}

TEST_CASE("constant signal gives a flagged all-zero figure") {
  auto fig = spectrum_to_figure(Eigen::VectorXd::Constant(64, 3.5), 8);
  CHECK(fig.degenerate);
  CHECK(fig.pixels.isZero(0));
  CHECK(fig.norm_min == 3.5);
  CHECK(fig.norm_max == 4.5);
  CHECK(figure_to_spectrum(fig).isApproxToConstant(3.5, 0));
}

TEST_CASE("pixel range is exactly [0, 255] for non-constant input") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto fig = spectrum_to_figure(random_signal(256, seed), 16);
    CHECK(fig.pixels.minCoeff() == 0);
    CHECK(fig.pixels.maxCoeff() == 255);
  }
}

TEST_CASE("round trip is within 1e-9 of the range") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Eigen::VectorXd l = random_signal(1024, 100 + seed);
    Eigen::VectorXd back = figure_to_spectrum(spectrum_to_figure(l, 32));
    const double range = l.maxCoeff() - l.minCoeff();
    CHECK((back - l).cwiseAbs().maxCoeff() <= 1e-9 * range);
  }
}

TEST_CASE("all-zero and all-255 figures invert to constants") {
  RamanFigure<double> f;
  f.pixels = RamanFigure<double>::Pixels::Zero(4, 4);
  f.norm_min = 5;
  f.norm_max = 10;
  CHECK(figure_to_spectrum(f).isApproxToConstant(5, 0));
  f.pixels.setConstant(255);
  f.norm_min = 0;
  f.norm_max = 2;
  CHECK(figure_to_spectrum(f).isApproxToConstant(2, 0));
}

TEST_CASE("figure arguments are validated") {
  CHECK_THROWS_AS(spectrum_to_figure(Eigen::VectorXd::Zero(1000), 32), ArgumentError);
  CHECK_THROWS_AS(spectrum_to_figure(Eigen::VectorXd::Zero(9), 3), ArgumentError);
  RamanFigure<double> f;
  f.pixels = RamanFigure<double>::Pixels::Zero(3, 3);
  CHECK_THROWS_AS(figure_to_spectrum(f), ArgumentError);
  f.pixels = RamanFigure<double>::Pixels::Zero(4, 4);
  f.norm_min = 2;
  f.norm_max = 1;
  CHECK_THROWS_AS(figure_to_spectrum(f), ArgumentError);
}

TEST_CASE("single precision figures work too") {
  Eigen::VectorXf l = random_signal(64, 5).cast<float>();
  auto fig = spectrum_to_figure(l, 8);
  CHECK(fig.pixels.maxCoeff() == 255.0f);
  CHECK((figure_to_spectrum(fig) - l).cwiseAbs().maxCoeff() < 1e-4f);
}

TEST_CASE("spectrum figure interpolates to side squared") {
  Spectrum s(Eigen::VectorXd::LinSpaced(1000, 400, 1800), random_signal(1000, 9));
  auto fig = spectrum_figure(s);
  CHECK(fig.side() == 32);
  const Eigen::VectorXd l = interpolate_spectrum(s, 1024);
  CHECK(fig.norm_min == l.minCoeff());
  CHECK(fig.norm_max == l.maxCoeff());
  CHECK((figure_to_spectrum(fig) - l).cwiseAbs().maxCoeff() < 1e-9 * (l.maxCoeff() - l.minCoeff()));
}

TEST_CASE("pgm export is an 8-bit binary image") {
  auto fig = spectrum_to_figure(Eigen::VectorXd::LinSpaced(16, 0, 15), 4);
  const std::string pgm = format_pgm(fig);
  const std::string header = "P5\n4 4\n255\n";
  REQUIRE(pgm.size() == header.size() + 16);
  CHECK(pgm.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(pgm[header.size()]) == 0);
  CHECK(static_cast<unsigned char>(pgm.back()) == 255);
}
