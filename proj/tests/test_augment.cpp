#include "spectradiff/augment.hpp"
#include "spectradiff/errors.hpp"

#include <doctest.h>

#include <random>

using namespace spectradiff;
using namespace spectradiff::augment;

namespace {

Spectrum random_spectrum(Eigen::Index n, std::uint64_t seed, int label = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 10);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return Spectrum(Eigen::VectorXd::LinSpaced(n, 400, 1800), v, label);
}

DaParams identity_params() {
  DaParams p;
  p.noise_sigma = 0;
  p.blur_sigma_range = {0, 0};
  p.scale_range = {1, 1};
  return p;
}

}  // namespace

TEST_CASE("identity configuration returns the input exactly") {
  Spectrum s = random_spectrum(100, 1, 2);
  std::mt19937_64 rng(1);
  Spectrum out = augment_da(s, identity_params(), rng);
  CHECK(out.intensities() == s.intensities());
  CHECK(out.wavenumbers() == s.wavenumbers());
  CHECK(out.label() == 2);
}

TEST_CASE("scale range [2, 2] doubles intensities") {
  Spectrum s = random_spectrum(50, 2);
  DaParams p = identity_params();
  p.scale_range = {2, 2};
  std::mt19937_64 rng(2);
  CHECK(augment_da(s, p, rng).intensities() == 2 * s.intensities());
}

TEST_CASE("blur preserves total intensity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Spectrum s = random_spectrum(200, 10 + seed);
    for (double sigma : {0.5, 1.3, 2.0, 7.5}) {
      const Eigen::VectorXd b = gaussian_blur(s.intensities(), sigma);
      CHECK(std::abs(b.sum() - s.intensities().sum()) <= 1e-6 * std::abs(s.intensities().sum()));
    }
  }
}

TEST_CASE("blur matches a direct mirrored-signal convolution") {
  Spectrum s = random_spectrum(20, 3);
  const Eigen::VectorXd& x = s.intensities();
  const double sigma = 1.7;
  const Eigen::VectorXd k = gaussian_kernel(sigma);
  const Eigen::Index r = k.size() / 2;
  // Pad by mirroring explicitly: x[r-1..0], x, x[n-1..n-r].
  Eigen::VectorXd padded(x.size() + 2 * r);
  padded << x.head(r).reverse(), x, x.tail(r).reverse();
  Eigen::VectorXd expect(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) expect[i] = padded.segment(i, 2 * r + 1).dot(k);
  CHECK((gaussian_blur(x, sigma) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel is normalized, symmetric and 3 sigma wide") {
  const Eigen::VectorXd k = gaussian_kernel(1.5);
  CHECK(k.size() == 11);
  CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(k == k.reverse());
  CHECK(gaussian_kernel(0).size() == 1);
}

TEST_CASE("noise scales with the spectrum range") {
  Spectrum s(Eigen::VectorXd::LinSpaced(4000, 0, 1), Eigen::VectorXd::LinSpaced(4000, 0, 4));
  DaParams p = identity_params();
  p.noise_sigma = 0.1;
  std::mt19937_64 rng(4);
  const Eigen::VectorXd resid = augment_da(s, p, rng).intensities() - s.intensities();
  CHECK(std::sqrt(resid.squaredNorm() / 4000) == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("invalid ranges are argument errors") {
  Spectrum s = random_spectrum(10, 5);
  std::mt19937_64 rng(5);
  DaParams p;
  p.scale_range = {0, 1};
  CHECK_THROWS_AS(augment_da(s, p, rng), ArgumentError);
  p = DaParams{};
  p.blur_sigma_range = {2, 1};
  CHECK_THROWS_AS(augment_da(s, p, rng), ArgumentError);
  p = DaParams{};
  p.noise_sigma = -0.1;
  CHECK_THROWS_AS(augment_da(s, p, rng), ArgumentError);
}

TEST_CASE("generate_da is class balanced, deterministic and label preserving") {
  LabeledDataset d(Eigen::VectorXd::LinSpaced(30, 400, 1800), {"a", "b", "c"});
  for (int i = 0; i < 7; ++i) d.add(random_spectrum(30, 100 + i, i % 3));
  LabeledDataset g = generate_da(d, 5, DaParams{}, 9);
  CHECK(g.class_counts() == std::vector<std::size_t>{5, 5, 5});
  CHECK(g.grid() == d.grid());
  CHECK(g == generate_da(d, 5, DaParams{}, 9));
  CHECK(!(g == generate_da(d, 5, DaParams{}, 10)));
  CHECK(generate_da(d, 0, DaParams{}, 9).empty());
}

TEST_CASE("empty class is an error naming the class") {
  LabeledDataset d(Eigen::VectorXd::LinSpaced(30, 400, 1800), {"a", "lonely"});
  d.add(random_spectrum(30, 1, 0));
  try {
    generate_da(d, 2, DaParams{}, 1);
    FAIL("no error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("lonely") != std::string::npos);
  }
}
