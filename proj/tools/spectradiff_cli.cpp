#include "spectradiff/augment.hpp"
#include "spectradiff/classifier.hpp"
#include "spectradiff/diffusion.hpp"
#include "spectradiff/errors.hpp"
#include "spectradiff/figure.hpp"
#include "spectradiff/metrics.hpp"
#include "spectradiff/pipeline.hpp"
#include "spectradiff/spectra_io.hpp"
#include "spectradiff/unet.hpp"
#include "spectradiff/vqvae.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace spectradiff;
using nn::read_checkpoint;
using nn::write_checkpoint;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void apply_thread_cap() {
  const char* env = std::getenv("SPECTRADIFF_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    throw ArgumentError("SPECTRADIFF_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  Eigen::setNbThreads(static_cast<int>(n));
}

struct SynthArgs {
  std::string spec, out;
};

struct VqArgs {
  std::string data, out;
  vq::VqVaeConfig model;
  vq::VqTrainConfig train;
};

struct DdpmArgs {
  std::string data, vqvae, out;
  int steps = 500;
  double beta_start = 1e-4, beta_end = 0.02;
  unet::UNetConfig net;
  diffusion::DdpmTrainConfig train;
  bool no_requantize = false;
};

struct SampleArgs {
  std::string ddpm, vqvae, class_name, out, pgm_dir;
  int count = 0;
  std::uint64_t seed = 0;
};

struct DaArgs {
  std::string data, out;
  int count = 20;
  double blur_min = 0.5, blur_max = 2.0, scale_min = 0.9, scale_max = 1.1;
  augment::DaParams params;
  std::uint64_t seed = 0;
};

struct MetricsArgs {
  std::string real, out;
  std::vector<std::string> generated, methods;
};

struct EvalArgs {
  std::string real, synthetic, test, out, monitor = "validation", confusion;
  int trials = 5;
  classify::ClassifierConfig config;
};

struct PcaArgs {
  std::vector<std::string> sets;
  std::string out;
  int length = static_cast<int>(metrics::kMetricLength);
};

int run_synth(const SynthArgs& a) {
  const SynthSpec spec = parse_synth_spec(read_text(a.spec));
  save_csv(generate_synthetic(spec), a.out);
  return 0;
}

int run_train_vqvae(const VqArgs& a) {
  const LabeledDataset data = load_csv(a.data);
  if (data.empty()) throw ArgumentError("train-vqvae: dataset " + a.data + " is empty");
  vq::VqVaeModel model(a.model, a.train.seed);
  const vq::VqTrainLog log = train_vqvae(model, vq::dataset_figures(data, a.model.figure_side), a.train);
  nn::Checkpoint ckpt;
  ckpt.kind = "vqvae";
  model.save(ckpt);
  GenerationContext::from_dataset(data, a.model.figure_side).save(ckpt);
  write_checkpoint(ckpt, a.out);
  std::cerr << "train-vqvae: reconstruction mse " << log.initial_reconstruction_mse << " -> "
            << log.final_reconstruction_mse << "\n";
  return 0;
}

int run_train_ddpm(DdpmArgs a) {
  const LabeledDataset data = load_csv(a.data);
  if (data.empty()) throw ArgumentError("train-ddpm: dataset " + a.data + " is empty");
  vq::VqVaeModel vqvae = vq::VqVaeModel::load(read_checkpoint(a.vqvae, "vqvae"));
  a.net.class_count = data.class_count();
  a.net.latent_side = vqvae.config().latent_side();
  a.net.latent_channels = vqvae.config().latent_dim;
  a.net.validate();
  auto net = std::make_unique<unet::UNet>(a.net, a.train.seed);
  diffusion::DiffusionModel model(diffusion::linear_beta_schedule<double>(a.steps, a.beta_start, a.beta_end),
                                  std::move(net), data.class_count(), a.net.latent_channels,
                                  a.net.latent_side);
  const auto log = train_ddpm(model, vqvae, data, a.train);
  nn::Checkpoint ckpt;
  ckpt.kind = "ddpm";
  model.save(ckpt);
  GenerationContext ctx = GenerationContext::from_dataset(data, vqvae.config().figure_side);
  ctx.requantize = !a.no_requantize;
  ctx.save(ckpt);
  write_checkpoint(ckpt, a.out);
  if (!log.epoch_loss.empty()) std::cerr << "train-ddpm: final loss " << log.epoch_loss.back() << "\n";
  return 0;
}

int run_sample(const SampleArgs& a) {
  if (a.count < 0) throw ArgumentError("sample: --count must be >= 0");
  const nn::Checkpoint ddpm_ckpt = read_checkpoint(a.ddpm, "ddpm");
  const GenerationContext ctx = GenerationContext::load(ddpm_ckpt);
  int label = -1;
  for (std::size_t i = 0; i < ctx.class_names.size(); ++i) {
    if (ctx.class_names[i] == a.class_name) label = static_cast<int>(i);
  }
  if (label < 0) {
    std::string known;
    for (const auto& n : ctx.class_names) known += (known.empty() ? "" : ", ") + n;
    throw ArgumentError("sample: unknown class '" + a.class_name + "' (known: " + known + ")");
  }
  LabeledDataset out(ctx.grid, ctx.class_names);
  if (a.count > 0) {
    auto model = diffusion::DiffusionModel::load(ddpm_ckpt);
    auto vqvae = vq::VqVaeModel::load(read_checkpoint(a.vqvae, "vqvae"));
    nn::Rng rng(a.seed);
    out = generate_spectra(model, vqvae, ctx, label, a.count, rng);
    if (!a.pgm_dir.empty()) {
      fs::create_directories(a.pgm_dir);
      for (std::size_t i = 0; i < out.size(); ++i) {
        write_pgm(spectrum_figure(out[i], vqvae.config().figure_side),
                  fs::path(a.pgm_dir) / (a.class_name + "_" + std::to_string(i) + ".pgm"));
      }
    }
  }
  save_csv(out, a.out);
  return 0;
}

int run_augment_da(DaArgs a) {
  a.params.blur_sigma_range = {a.blur_min, a.blur_max};
  a.params.scale_range = {a.scale_min, a.scale_max};
  a.params.validate();
  save_csv(augment::generate_da(load_csv(a.data), a.count, a.params, a.seed), a.out);
  return 0;
}

int run_metrics(const MetricsArgs& a) {
  if (!a.methods.empty() && a.methods.size() != a.generated.size()) {
    throw ArgumentError("metrics: --method must be given once per --generated file");
  }
  const Eigen::MatrixXd real = metrics::resampled_matrix(load_csv(a.real));
  std::vector<metrics::MetricsRow> rows;
  for (std::size_t i = 0; i < a.generated.size(); ++i) {
    const std::string name = a.methods.empty() ? fs::path(a.generated[i]).stem().string() : a.methods[i];
    rows.push_back(metrics::compare_sets(name, real, metrics::resampled_matrix(load_csv(a.generated[i]))));
  }
  metrics::write_metrics_csv(rows, a.out);
  return 0;
}

int run_augment_eval(EvalArgs a) {
  const LabeledDataset real = load_csv(a.real);
  const LabeledDataset test = load_csv(a.test).relabeled(real.class_names());
  a.config.class_count = real.class_count();
  const auto mode = a.monitor == "test" ? classify::MonitorMode::Test : classify::MonitorMode::Validation;
  std::string csv = "condition,trial,accuracy\n";
  auto append = [&csv](const std::string& cond, const classify::ExperimentResult& r) {
    for (std::size_t i = 0; i < r.per_trial.size(); ++i) {
      csv += cond + "," + std::to_string(i + 1) + "," + format_real(r.per_trial[i]) + "\n";
    }
    csv += cond + ",mean," + format_real(r.mean) + "\n";
    csv += cond + ",sd," + format_real(r.sd) + "\n";
  };
  const auto baseline = classify::augmentation_experiment(real, std::nullopt, test, a.config, a.trials, mode);
  append("real", baseline);
  std::optional<classify::ExperimentResult> augmented;
  if (!a.synthetic.empty()) {
    augmented = classify::augmentation_experiment(real, load_csv(a.synthetic).relabeled(real.class_names()), test, a.config, a.trials, mode);
    append("real+synthetic", *augmented);
  }
  write_text(a.out, csv);
  if (!a.confusion.empty()) {
    const auto& r = augmented ? augmented->reports.back() : baseline.reports.back();
    write_text(a.confusion, classify::format_confusion_csv(r, real.class_names()));
  }
  return 0;
}

int run_export_pca(const PcaArgs& a) {
  std::vector<metrics::LabeledVectors> sets;
  for (const auto& item : a.sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ArgumentError("export-pca: --set expects name=path, got '" + item + "'");
    }
    const LabeledDataset d = load_csv(item.substr(eq + 1));
    metrics::LabeledVectors v{item.substr(0, eq), {}, metrics::resampled_matrix(d, a.length)};
    for (const auto& s : d.spectra()) v.labels.push_back(d.class_names()[static_cast<std::size_t>(*s.label())]);
    sets.push_back(std::move(v));
  }
  write_text(a.out, metrics::format_pca_csv(metrics::export_pca(sets)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent diffusion augmentation for Raman spectra"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML key = value file; flags override it");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-data", "Generate the Gaussian-peak surrogate dataset");
  c_synth->add_option("--spec", synth.spec, "TOML spec file")->required();
  c_synth->add_option("--out", synth.out, "Output CSV")->required();

  VqArgs vqa;
  auto* c_vq = app.add_subcommand("train-vqvae", "Train the VQ-VAE on Raman figures");
  c_vq->add_option("--data", vqa.data, "Training CSV")->required();
  c_vq->add_option("--out", vqa.out, "Output checkpoint")->required();
  c_vq->add_option("--d", vqa.model.latent_dim, "Latent dimension")->capture_default_str();
  c_vq->add_option("--codebook", vqa.model.codebook_size, "Codebook size")->capture_default_str();
  c_vq->add_option("--side", vqa.model.figure_side, "Figure side M")->capture_default_str();
  c_vq->add_option("--commitment", vqa.model.commitment, "Commitment weight")->capture_default_str();
  c_vq->add_option("--hidden1", vqa.model.hidden1)->capture_default_str();
  c_vq->add_option("--hidden2", vqa.model.hidden2)->capture_default_str();
  c_vq->add_option("--epochs", vqa.train.epochs)->capture_default_str();
  c_vq->add_option("--batch", vqa.train.batch_size)->capture_default_str();
  c_vq->add_option("--lr", vqa.train.learning_rate)->capture_default_str();
  c_vq->add_option("--seed", vqa.train.seed)->capture_default_str();

  DdpmArgs dda;
  auto* c_ddpm = app.add_subcommand("train-ddpm", "Train the latent diffusion model");
  c_ddpm->add_option("--data", dda.data, "Training CSV")->required();
  c_ddpm->add_option("--vqvae", dda.vqvae, "VQ-VAE checkpoint")->required();
  c_ddpm->add_option("--out", dda.out, "Output checkpoint")->required();
  c_ddpm->add_option("--steps", dda.steps, "Diffusion steps T")->capture_default_str();
  c_ddpm->add_option("--beta-start", dda.beta_start)->capture_default_str();
  c_ddpm->add_option("--beta-end", dda.beta_end)->capture_default_str();
  c_ddpm->add_option("--epochs", dda.train.epochs)->capture_default_str();
  c_ddpm->add_option("--batch", dda.train.batch_size)->capture_default_str();
  c_ddpm->add_option("--lr", dda.train.learning_rate)->capture_default_str();
  c_ddpm->add_option("--seed", dda.train.seed)->capture_default_str();
  c_ddpm->add_option("--base-channels", dda.net.base_channels)->capture_default_str();
  c_ddpm->add_option("--depth", dda.net.depth)->capture_default_str();
  c_ddpm->add_option("--time-embed-dim", dda.net.time_embed_dim)->capture_default_str();
  c_ddpm->add_flag("--no-requantize", dda.no_requantize, "Decode sampled latents without snapping to the codebook");

  SampleArgs sa;
  auto* c_sample = app.add_subcommand("sample", "Generate spectra for one class");
  c_sample->add_option("--ddpm", sa.ddpm, "Diffusion checkpoint")->required();
  c_sample->add_option("--vqvae", sa.vqvae, "VQ-VAE checkpoint")->required();
  c_sample->add_option("--class", sa.class_name, "Class name")->required();
  c_sample->add_option("--count", sa.count, "Number of spectra")->required();
  c_sample->add_option("--out", sa.out, "Output CSV")->required();
  c_sample->add_option("--seed", sa.seed)->capture_default_str();
  c_sample->add_option("--pgm-dir", sa.pgm_dir, "Also write each sample as a PGM figure");

  DaArgs da;
  auto* c_da = app.add_subcommand("augment-da", "Classical scale/blur/noise augmentation");
  c_da->add_option("--data", da.data, "Input CSV")->required();
  c_da->add_option("--out", da.out, "Output CSV")->required();
  c_da->add_option("--count", da.count, "Spectra per class")->capture_default_str();
  c_da->add_option("--noise-sigma", da.params.noise_sigma)->capture_default_str();
  c_da->add_option("--blur-min", da.blur_min)->capture_default_str();
  c_da->add_option("--blur-max", da.blur_max)->capture_default_str();
  c_da->add_option("--scale-min", da.scale_min)->capture_default_str();
  c_da->add_option("--scale-max", da.scale_max)->capture_default_str();
  c_da->add_option("--seed", da.seed)->capture_default_str();

  MetricsArgs ma;
  auto* c_metrics = app.add_subcommand("metrics", "Similarity report between real and generated sets");
  c_metrics->add_option("--real", ma.real, "Real CSV")->required();
  c_metrics->add_option("--generated", ma.generated, "Generated CSV (repeatable)")->required();
  c_metrics->add_option("--method", ma.methods, "Row name per --generated (default: file stem)");
  c_metrics->add_option("--out", ma.out, "Output CSV")->required();

  EvalArgs ea;
  auto* c_eval = app.add_subcommand("augment-eval", "Classifier accuracy with and without synthetic data");
  c_eval->add_option("--real", ea.real, "Real training CSV")->required();
  c_eval->add_option("--synthetic", ea.synthetic, "Synthetic CSV added to training");
  c_eval->add_option("--test", ea.test, "Test CSV")->required();
  c_eval->add_option("--out", ea.out, "Output CSV")->required();
  c_eval->add_option("--trials", ea.trials)->capture_default_str();
  c_eval->add_option("--monitor", ea.monitor, "Early-stopping monitor")
      ->check(CLI::IsMember({"validation", "test"}))
      ->capture_default_str();
  c_eval->add_option("--max-epochs", ea.config.max_epochs)->capture_default_str();
  c_eval->add_option("--patience", ea.config.patience)->capture_default_str();
  c_eval->add_option("--batch", ea.config.batch_size)->capture_default_str();
  c_eval->add_option("--lr", ea.config.learning_rate)->capture_default_str();
  c_eval->add_option("--seed", ea.config.seed)->capture_default_str();
  c_eval->add_option("--confusion", ea.confusion, "Write the last trial's confusion matrix here");

  PcaArgs pa;
  auto* c_pca = app.add_subcommand("export-pca", "Two-component PCA coordinates of labeled sets");
  c_pca->add_option("--set", pa.sets, "name=path (repeatable)")->required();
  c_pca->add_option("--out", pa.out, "Output CSV")->required();
  c_pca->add_option("--length", pa.length, "Resampled length")->capture_default_str();

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    apply_thread_cap();
    if (*c_synth) return run_synth(synth);
    if (*c_vq) return run_train_vqvae(vqa);
    if (*c_ddpm) return run_train_ddpm(dda);
    if (*c_sample) return run_sample(sa);
    if (*c_da) return run_augment_da(da);
    if (*c_metrics) return run_metrics(ma);
    if (*c_eval) return run_augment_eval(ea);
    if (*c_pca) return run_export_pca(pa);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
