#include "spectradiff/errors.hpp"
#include "spectradiff/spectra_io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace spectradiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "spectradiff_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Values with long decimal expansions so formatting has to round-trip.
LabeledDataset random_dataset(std::size_t rows, Eigen::Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Eigen::VectorXd grid(k);
  double w = 400;
  for (Eigen::Index i = 0; i < k; ++i) grid[i] = (w += 0.1 + std::abs(n(rng)));
  LabeledDataset d(grid, {"alpha", "beta", "gamma"});
  for (std::size_t r = 0; r < rows; ++r) {
    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i) v[i] = n(rng) * std::pow(10.0, static_cast<double>(i % 7) - 3);
    d.add(Spectrum(grid, v, static_cast<int>(r % 3)));
  }
  return d;
}

}  // namespace

TEST_CASE("minimal two-row file gives one class") {
  const fs::path p = scratch("minimal.csv");
  write_text(p, "1,2,3,label\n0.5,0.25,1,A\n2,3,4,A\n");
  LabeledDataset d = load_csv(p);
  CHECK(d.size() == 2);
  CHECK(d.class_count() == 1);
  CHECK(d.class_names()[0] == "A");
  CHECK(d.grid() == Eigen::Vector3d(1, 2, 3));
  CHECK(d[1].intensities() == Eigen::Vector3d(2, 3, 4));
}

TEST_CASE("short row is a parse error naming its row") {
  try {
    parse_csv("1,2,3,label\n1,2,A\n");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  try {
    parse_csv("1,2,3,label\n1,2,3,A\n1,x,3,B\n");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("non-ascending grid is a format error") {
  CHECK_THROWS_AS(parse_csv("1,3,2,label\n1,2,3,A\n"), FormatError);
  CHECK_THROWS_AS(parse_csv("1,1,2,label\n1,2,3,A\n"), FormatError);
  CHECK_THROWS_AS(parse_csv("1,2,3\n1,2,3\n"), FormatError);
  CHECK_THROWS_AS(parse_csv(""), FormatError);
}

TEST_CASE("file errors carry the path") {
  const fs::path p = scratch("bad_rows.csv");
  write_text(p, "1,2,label\n1,A\n");
  try {
    load_csv(p);
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad_rows.csv") != std::string::npos);
  }
  CHECK_THROWS(load_csv(scratch("does_not_exist.csv")));
}

TEST_CASE("labels get indices in first-appearance order") {
  LabeledDataset d = parse_csv("1,2,label\n0,0,zeta\n0,0,alpha\n0,0,zeta\n0,0,mid\n");
  CHECK(d.class_names() == std::vector<std::string>{"zeta", "alpha", "mid"});
  CHECK(d.labels() == std::vector<int>{0, 1, 0, 2});
}

TEST_CASE("save then load is the identity and the bytes are stable") {
  LabeledDataset d = random_dataset(10, 17, 3);
  const fs::path p = scratch("roundtrip.csv");
  save_csv(d, p);
  LabeledDataset back = load_csv(p);
  CHECK(back == d);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(back[i].intensities() == d[i].intensities());
  const fs::path p2 = scratch("roundtrip2.csv");
  save_csv(back, p2);
  CHECK(read_text(p) == read_text(p2));
}

TEST_CASE("empty dataset writes a header only; one spectrum writes five fields") {
  LabeledDataset empty(Eigen::Vector4d(1, 2, 3, 4), {"A"});
  const std::string text = format_csv(empty);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(text.rfind("label\n") == text.size() - 6);

  LabeledDataset one = empty;
  one.add(Spectrum(empty.grid(), Eigen::Vector4d(0.1, 0.2, 0.3, 0.4), 0));
  std::istringstream lines(format_csv(one));
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(std::count(row.begin(), row.end(), ',') == 4);
}

TEST_CASE("shortest round-trip float formatting") {
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(1.0) == "1");
  CHECK(format_real(-2.5e-300) == "-2.5e-300");
  const double third = 1.0 / 3.0;
  CHECK(std::stod(format_real(third)) == third);
}

TEST_CASE("spectrum invariants are enforced") {
  CHECK_THROWS_AS(Spectrum(Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 0)), ArgumentError);
  CHECK_THROWS_AS(Spectrum(Eigen::Vector2d(2, 1), Eigen::Vector2d(0, 0)), ArgumentError);
  CHECK_THROWS_AS(Spectrum(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)), ArgumentError);
  CHECK_THROWS_AS(Spectrum(Eigen::Vector2d(1, 2), Eigen::Vector3d(0, 0, 0)), ArgumentError);
  CHECK_THROWS_AS(Spectrum(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, NAN)), ArgumentError);
  LabeledDataset d(Eigen::Vector2d(1, 2), {"A"});
  CHECK_THROWS_AS(d.add(Spectrum(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0), 1)), ArgumentError);
  CHECK_THROWS_AS(d.add(Spectrum(Eigen::Vector2d(1, 3), Eigen::Vector2d(0, 0), 0)), ArgumentError);
}

TEST_CASE("noise-free samples of a class are identical") {
  SynthSpec s;
  s.noise_sigma = 0;
  s.samples_per_class = 2;
  LabeledDataset d = generate_synthetic(s);
  REQUIRE(d.size() == 8);
  for (std::size_t c = 0; c < 4; ++c) CHECK(d[2 * c].intensities() == d[2 * c + 1].intensities());
  CHECK(d[0].intensities() != d[2].intensities());
}

TEST_CASE("same seed gives bitwise identical datasets") {
  SynthSpec s;
  LabeledDataset a = generate_synthetic(s), b = generate_synthetic(s);
  CHECK(a == b);
  CHECK(format_csv(a) == format_csv(b));
  s.seed = 8;
  CHECK(!(generate_synthetic(s) == a));
}

TEST_CASE("class mean spectra are pairwise distinct") {
  LabeledDataset d = generate_synthetic(SynthSpec{});
  CHECK(d.class_counts() == std::vector<std::size_t>(4, 10));
  std::vector<Eigen::VectorXd> means;
  for (int c = 0; c < 4; ++c) means.push_back(d.filter_class(c).intensity_matrix().colwise().mean());
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) CHECK((means[a] - means[b]).norm() > 0);
}

TEST_CASE("sample noise has the requested sigma") {
  SynthSpec s;
  s.samples_per_class = 50;
  s.noise_sigma = 0.05;
  LabeledDataset d = generate_synthetic(s);
  s.noise_sigma = 0;
  s.samples_per_class = 1;
  LabeledDataset clean = generate_synthetic(s);
  // Templates are drawn before any noise, so both specs share them.
  Eigen::MatrixXd resid = d.filter_class(2).intensity_matrix().rowwise() -
                          clean[2].intensities().transpose();
  const double sd = std::sqrt(resid.array().square().mean());
  CHECK(sd == doctest::Approx(0.05).epsilon(0.02));
}

TEST_CASE("synth spec validation and parsing") {
  SynthSpec s;
  s.class_count = 1;
  CHECK_THROWS_AS(generate_synthetic(s), ArgumentError);
  s = SynthSpec{};
  s.noise_sigma = -1;
  CHECK_THROWS_AS(s.validate(), ArgumentError);

  SynthSpec p = parse_synth_spec(
      "# comment\n[synth]\nclass_count = 3\nnoise_sigma = 0.1\n"
      "peak_center_range = [500, 600]\nseed = 18446744073709551615\n");
  CHECK(p.class_count == 3);
  CHECK(p.noise_sigma == 0.1);
  CHECK(p.peak_center_range == std::pair<double, double>{500, 600});
  CHECK(p.seed == 18446744073709551615ULL);
  CHECK_THROWS_AS(parse_synth_spec("class_count 3\n"), ParseError);
  CHECK_THROWS_AS(parse_synth_spec("class_count = 2.5\n"), ParseError);
}

TEST_CASE("relabeling maps names onto another registry") {
  LabeledDataset d = parse_csv("1,2,label\n0,0,b\n1,1,a\n");
  LabeledDataset r = d.relabeled({"a", "b", "c"});
  CHECK(r.labels() == std::vector<int>{1, 0});
  CHECK(r.class_names().size() == 3);
  CHECK_THROWS_AS(d.relabeled({"a"}), ArgumentError);
}

TEST_CASE("merge requires matching registries") {
  LabeledDataset a = parse_csv("1,2,label\n0,0,a\n");
  LabeledDataset b = parse_csv("1,2,label\n0,0,b\n");
  CHECK_THROWS_AS(a.merged(b), ArgumentError);
  CHECK(a.merged(a).size() == 2);
}
