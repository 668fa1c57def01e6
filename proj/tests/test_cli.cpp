#include "cli_pipeline.hpp"

#include "spectradiff/spectra_io.hpp"

#include <doctest.h>

using namespace testsupport;

namespace {

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("spectradiff_test_cli_" + name); }

}  // namespace

TEST_CASE("no arguments prints usage and exits 2") {
  const fs::path dir = scratch("usage");
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  fs::remove(log);
  CHECK(run_cli(SPECTRADIFF_CLI, {}, log) == 2);
  CHECK(slurp(log).find("synth-data") != std::string::npos);
}

TEST_CASE("usage errors exit 2 and runtime failures exit 1") {
  const fs::path dir = scratch("errors");
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  CHECK(run_cli(SPECTRADIFF_CLI, {"no-such-command"}, log) == 2);
  CHECK(run_cli(SPECTRADIFF_CLI, {"synth-data", "--spec", TOY_SPEC}, log) == 2);
  CHECK(run_cli(SPECTRADIFF_CLI, {"synth-data", "--spec", (dir / "missing.toml").string(), "--out",
                                  (dir / "x.csv").string()},
                log) == 1);
  CHECK(run_cli(SPECTRADIFF_CLI, {"metrics", "--real", (dir / "missing.csv").string(), "--generated",
                                  (dir / "missing.csv").string(), "--out", (dir / "m.csv").string()},
                log) == 1);
}

TEST_CASE("full pipeline runs, sample count 0 writes a header-only csv, and reruns are byte identical") {
  const fs::path a = scratch("pipe_a"), b = scratch("pipe_b");
  const auto first = run_small_pipeline(SPECTRADIFF_CLI, TOY_SPEC, a);
  REQUIRE(first.size() == 9);
  for (const auto& s : first) {
    INFO(s.name << "\n" << slurp(a / "log.txt"));
    CHECK(s.exit_code == 0);
  }

  spectradiff::LabeledDataset gen = spectradiff::load_csv(a / "gen.csv");
  CHECK(gen.size() == 4);
  CHECK(gen.class_names() == std::vector<std::string>{"class_1"});
  CHECK(spectradiff::load_csv(a / "da.csv").class_counts() == std::vector<std::size_t>(4, 3));
  CHECK(slurp(a / "metrics.csv").rfind("method,cos,mmd,jsd,fd\n", 0) == 0);

  const fs::path empty = a / "empty.csv";
  CHECK(run_cli(SPECTRADIFF_CLI,
                {"sample", "--ddpm", (a / "ddpm.ckpt").string(), "--vqvae", (a / "vq.ckpt").string(), "--class",
                 "class_0", "--count", "0", "--out", empty.string()},
                a / "log.txt") == 0);
  const std::string text = slurp(empty);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(text.rfind("label\n") == text.size() - 6);

  CHECK(run_cli(SPECTRADIFF_CLI,
                {"sample", "--ddpm", (a / "ddpm.ckpt").string(), "--vqvae", (a / "vq.ckpt").string(), "--class",
                 "nope", "--count", "1", "--out", empty.string()},
                a / "log.txt") != 0);

  const auto second = run_small_pipeline(SPECTRADIFF_CLI, TOY_SPEC, b);
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (const auto& out : first[i].outputs) {
      INFO(out.filename().string());
      CHECK(slurp(out) == slurp(b / out.filename()));
    }
  }
}

TEST_CASE("toml config file supplies defaults that flags override") {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  const fs::path data = dir / "train.csv";
  REQUIRE(run_cli(SPECTRADIFF_CLI, {"synth-data", "--spec", TOY_SPEC, "--out", data.string()}, log) == 0);
  {
    std::ofstream cfg(dir / "da.toml");
    cfg << "[augment-da]\ncount = 2\nseed = 4\n";
  }
  REQUIRE(run_cli(SPECTRADIFF_CLI, {"--config", (dir / "da.toml").string(), "augment-da", "--data", data.string(),
                                    "--out", (dir / "a.csv").string()},
                  log) == 0);
  CHECK(spectradiff::load_csv(dir / "a.csv").size() == 8);
  REQUIRE(run_cli(SPECTRADIFF_CLI, {"--config", (dir / "da.toml").string(), "augment-da", "--data", data.string(),
                                    "--out", (dir / "b.csv").string(), "--count", "1"},
                  log) == 0);
  CHECK(spectradiff::load_csv(dir / "b.csv").size() == 4);
}
