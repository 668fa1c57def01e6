#include "spectradiff/vqvae.hpp"

#include "spectradiff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace spectradiff::vq {

using nn::Vector;

// Quantization ----------------------------------------------------------------

QuantizedBatch quantize_batch(const Tensor& z, const Eigen::MatrixXd& codebook) {
  if (z.rank() != 4 || z.dim(1) != codebook.cols()) {
    throw ShapeError("quantize: latent " + nn::shape_string(z.shape()) + " vs codebook dim " +
                     std::to_string(codebook.cols()));
  }
  if (codebook.rows() < 1) throw ArgumentError("quantize: empty codebook");
  const Index n = z.dim(0), d = z.dim(1), plane = z.dim(2) * z.dim(3);
  const Index codes = codebook.rows();
  // Row-major copy so each code's components are contiguous.
  const nn::RowMatrix book = codebook;
  QuantizedBatch out{Tensor(z.shape()), std::vector<int>(static_cast<std::size_t>(n * plane))};
  std::vector<Real> v(static_cast<std::size_t>(d));
  for (Index i = 0; i < n; ++i) {
    for (Index pos = 0; pos < plane; ++pos) {
      for (Index c = 0; c < d; ++c) v[c] = z[(i * d + c) * plane + pos];
      Index best = 0;
      Real best_dist = 0;
      for (Index k = 0; k < codes; ++k) {
        const Real* e = book.data() + k * d;
        Real dist = 0;
        for (Index c = 0; c < d; ++c) {
          const Real diff = v[c] - e[c];
          dist += diff * diff;
        }
        if (k == 0 || dist < best_dist) {
          best = k;
          best_dist = dist;
        }
      }
      out.indices[static_cast<std::size_t>(i * plane + pos)] = static_cast<int>(best);
      for (Index c = 0; c < d; ++c) out.values[(i * d + c) * plane + pos] = book(best, c);
    }
  }
  return out;
}

LatentGrid quantize(const LatentGrid& z_e, const Codebook& codebook) {
  const Index d = z_e.dim(), m = z_e.side();
  QuantizedBatch q = quantize_batch(z_e.values.reshaped({1, d, m, z_e.values.dim(2)}),
                                    codebook.embeddings);
  LatentGrid out;
  out.values = q.values.reshaped({d, m, z_e.values.dim(2)});
  out.quantized = true;
  Eigen::MatrixXi idx(m, z_e.values.dim(2));
  for (Index h = 0; h < m; ++h) {
    for (Index w = 0; w < idx.cols(); ++w) idx(h, w) = q.indices[static_cast<std::size_t>(h * idx.cols() + w)];
  }
  out.indices = std::move(idx);
  return out;
}

// Loss ------------------------------------------------------------------------

VqLossParts vq_loss(const Tensor& figure, const Tensor& reconstruction, const Tensor& z_e,
                    const Tensor& z_q, Real zeta) {
  if (!figure.same_shape(reconstruction) || !z_e.same_shape(z_q)) {
    throw ShapeError("vq_loss: inconsistent shapes");
  }
  if (!(zeta >= 0)) throw ArgumentError("vq_loss: zeta must be >= 0");
  VqLossParts parts;
  parts.reconstruction =
      (figure.flat() - reconstruction.flat()).squaredNorm() / Real(figure.size());
  const Real latent_gap = (z_e.flat() - z_q.flat()).squaredNorm() / Real(z_e.size());
  // Forward values agree; the stop-gradients only route the gradients.
  parts.codebook = latent_gap;
  parts.commitment = latent_gap;
  parts.total = parts.reconstruction + parts.codebook + zeta * parts.commitment;
  return parts;
}

// Model -----------------------------------------------------------------------

void VqVaeConfig::validate() const {
  if (figure_side < 4 || !is_power_of_two(figure_side)) {
    throw ConfigError("vqvae: figure side must be a power of two >= 4");
  }
  if (latent_dim < 1) throw ConfigError("vqvae: latent dim must be >= 1");
  if (codebook_size < 1) throw ConfigError("vqvae: codebook size must be >= 1");
  if (!(commitment >= 0)) throw ConfigError("vqvae: commitment weight must be >= 0");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("vqvae: hidden widths must be >= 1");
}

VqVaeModel::VqVaeModel(VqVaeConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Rng rng(seed);
  const Index d = config_.latent_dim;
  enc1_ = nn::Conv2d(1, config_.hidden1, 4, 2, 1, rng);
  enc2_ = nn::Conv2d(config_.hidden1, config_.hidden2, 4, 2, 1, rng);
  enc3_ = nn::Conv2d(config_.hidden2, d, 3, 1, 1, rng);
  dec1_ = nn::Conv2d(d, config_.hidden2, 3, 1, 1, rng);
  dec2_ = nn::ConvTranspose2d(config_.hidden2, config_.hidden1, 4, 2, 1, rng);
  dec3_ = nn::ConvTranspose2d(config_.hidden1, 1, 4, 2, 1, rng);
  const Real bound = Real(1) / Real(config_.codebook_size);
  codebook_ = nn::Parameter(nn::uniform_tensor({config_.codebook_size, d}, bound, rng));
}

Tensor VqVaeModel::encode_batch(const Tensor& x) {
  const Index side = config_.figure_side;
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != side || x.dim(3) != side) {
    throw ShapeError("encode: expected [N, 1, " + std::to_string(side) + ", " +
                     std::to_string(side) + "], got " + nn::shape_string(x.shape()));
  }
  Tensor h = enc_act1_.forward(enc1_.forward(x));
  h = enc_act2_.forward(enc2_.forward(h));
  return enc3_.forward(h);
}

Tensor VqVaeModel::decode_batch(const Tensor& z) {
  const Index m = config_.latent_side();
  if (z.rank() != 4 || z.dim(1) != config_.latent_dim || z.dim(2) != m || z.dim(3) != m) {
    throw ShapeError("decode: expected [N, " + std::to_string(config_.latent_dim) + ", " +
                     std::to_string(m) + ", " + std::to_string(m) + "], got " +
                     nn::shape_string(z.shape()));
  }
  Tensor h = dec_act1_.forward(dec1_.forward(z));
  h = dec_act2_.forward(dec2_.forward(h));
  return dec_out_.forward(dec3_.forward(h));
}

Tensor VqVaeModel::encoder_backward(const Tensor& grad) {
  Tensor g = enc3_.backward(grad);
  g = enc2_.backward(enc_act2_.backward(g));
  return enc1_.backward(enc_act1_.backward(g));
}

Tensor VqVaeModel::decoder_backward(const Tensor& grad) {
  Tensor g = dec3_.backward(dec_out_.backward(grad));
  g = dec2_.backward(dec_act2_.backward(g));
  return dec1_.backward(dec_act1_.backward(g));
}

QuantizedBatch VqVaeModel::quantize_batch(const Tensor& z_e) const {
  return vq::quantize_batch(z_e, codebook().embeddings);
}

Codebook VqVaeModel::codebook() const {
  const auto& t = codebook_.value;
  return {Eigen::MatrixXd(t.matrix())};
}

LatentGrid VqVaeModel::encode(const RamanFigure<double>& figure) {
  Tensor z = encode_batch(figures_to_batch({figure}));
  LatentGrid out;
  out.values = z.reshaped({z.dim(1), z.dim(2), z.dim(3)});
  return out;
}

LatentGrid VqVaeModel::quantize(const LatentGrid& z_e) const {
  return vq::quantize(z_e, codebook());
}

RamanFigure<double> VqVaeModel::decode(const LatentGrid& z, Real norm_min, Real norm_max) {
  if (z.values.rank() != 3) throw ShapeError("decode: latent grid must be [d, m, m]");
  Tensor x = decode_batch(z.values.reshaped({1, z.values.dim(0), z.values.dim(1), z.values.dim(2)}));
  RamanFigure<double> fig;
  const Index side = config_.figure_side;
  fig.pixels = Eigen::Map<const RamanFigure<double>::Pixels>(x.data(), side, side) * Real(255);
  fig.norm_min = norm_min;
  fig.norm_max = norm_max;
  return fig;
}

VqLossParts VqVaeModel::evaluate(const Tensor& x) {
  Tensor z_e = encode_batch(x);
  QuantizedBatch q = quantize_batch(z_e);
  Tensor recon = decode_batch(q.values);
  return vq_loss(x, recon, z_e, q.values, config_.commitment);
}

VqLossParts VqVaeModel::loss_and_grad(const Tensor& x) {
  Tensor z_e = encode_batch(x);
  QuantizedBatch q = quantize_batch(z_e);
  Tensor recon = decode_batch(q.values);
  VqLossParts parts = vq_loss(x, recon, z_e, q.values, config_.commitment);

  const Real n_pix = Real(x.size());
  const Real n_lat = Real(z_e.size());
  Tensor grad_recon(recon.shape(), Vector(Real(2) / n_pix * (recon.flat() - x.flat())));
  Tensor grad_zq = decoder_backward(grad_recon);

  // Straight-through: the decoder-input gradient lands on z_e unchanged; the
  // commitment term pulls z_e toward the frozen z_q.
  const Vector gap = z_e.flat() - q.values.flat();
  Tensor grad_ze(z_e.shape(), Vector(grad_zq.flat() + config_.commitment * Real(2) / n_lat * gap));
  encoder_backward(grad_ze);

  // Codebook term moves the selected embeddings toward the frozen z_e.
  const Index n = z_e.dim(0), d = z_e.dim(1), plane = z_e.dim(2) * z_e.dim(3);
  auto book_grad = codebook_.grad.matrix();
  for (Index i = 0; i < n; ++i) {
    for (Index pos = 0; pos < plane; ++pos) {
      const int k = q.indices[static_cast<std::size_t>(i * plane + pos)];
      for (Index c = 0; c < d; ++c) {
        book_grad(k, c) -= Real(2) / n_lat * gap[(i * d + c) * plane + pos];
      }
    }
  }
  return parts;
}

nn::ParamStore VqVaeModel::encoder_parameters() {
  nn::ParamStore store;
  enc1_.collect(store, "encoder.conv1");
  enc2_.collect(store, "encoder.conv2");
  enc3_.collect(store, "encoder.conv3");
  return store;
}

nn::ParamStore VqVaeModel::decoder_parameters() {
  nn::ParamStore store;
  dec1_.collect(store, "decoder.conv1");
  dec2_.collect(store, "decoder.tconv2");
  dec3_.collect(store, "decoder.tconv3");
  return store;
}

nn::ParamStore VqVaeModel::parameters() {
  nn::ParamStore store;
  enc1_.collect(store, "encoder.conv1");
  enc2_.collect(store, "encoder.conv2");
  enc3_.collect(store, "encoder.conv3");
  dec1_.collect(store, "decoder.conv1");
  dec2_.collect(store, "decoder.tconv2");
  dec3_.collect(store, "decoder.tconv3");
  store.add("codebook", codebook_);
  return store;
}

void VqVaeModel::init_codebook_from(const Tensor& x, nn::Rng& rng) {
  Tensor z = encode_batch(x);
  const Index n = z.dim(0), d = z.dim(1), plane = z.dim(2) * z.dim(3);
  const Index positions = n * plane;
  std::vector<Index> order(static_cast<std::size_t>(positions));
  std::iota(order.begin(), order.end(), Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  const Real spread = std::sqrt((z.flat().array() - z.flat().mean()).square().mean());
  std::normal_distribution<Real> jitter(0.0, 0.01 * std::max(spread, Real(1e-6)));
  auto book = codebook_.value.matrix();
  for (Index k = 0; k < book.rows(); ++k) {
    const Index p = order[static_cast<std::size_t>(k % positions)];
    const Index i = p / plane, pos = p % plane;
    for (Index c = 0; c < d; ++c) book(k, c) = z[(i * d + c) * plane + pos] + jitter(rng);
  }
  codebook_seeded_ = true;
}

void VqVaeModel::save(nn::Checkpoint& ckpt) {
  ckpt.meta["vqvae"] = {{"figure_side", config_.figure_side},
                        {"latent_side", config_.latent_side()},
                        {"latent_dim", config_.latent_dim},
                        {"codebook_size", config_.codebook_size},
                        {"commitment", config_.commitment},
                        {"hidden1", config_.hidden1},
                        {"hidden2", config_.hidden2},
                        {"codebook_seeded", codebook_seeded_}};
  nn::save_params(ckpt, parameters(), "vqvae");
}

VqVaeModel VqVaeModel::load(const nn::Checkpoint& ckpt) {
  const auto& m = ckpt.meta.at("vqvae");
  VqVaeConfig config;
  config.figure_side = m.at("figure_side").get<Index>();
  config.latent_dim = m.at("latent_dim").get<Index>();
  config.codebook_size = m.at("codebook_size").get<Index>();
  config.commitment = m.at("commitment").get<Real>();
  config.hidden1 = m.at("hidden1").get<Index>();
  config.hidden2 = m.at("hidden2").get<Index>();
  VqVaeModel model(config);
  nn::load_params(ckpt, model.parameters(), "vqvae");
  model.codebook_seeded_ = m.value("codebook_seeded", false);
  return model;
}

// Training --------------------------------------------------------------------

Tensor figures_to_batch(const std::vector<RamanFigure<double>>& figures) {
  if (figures.empty()) throw ArgumentError("figures_to_batch: no figures");
  const Index side = figures.front().side();
  Tensor out({static_cast<Index>(figures.size()), 1, side, side});
  for (std::size_t i = 0; i < figures.size(); ++i) {
    if (figures[i].side() != side) throw ShapeError("figures_to_batch: mixed figure sides");
    out.flat().segment(static_cast<Index>(i) * side * side, side * side) =
        Eigen::Map<const Vector>(figures[i].pixels.data(), side * side) / Real(255);
  }
  return out;
}

std::vector<RamanFigure<double>> dataset_figures(const LabeledDataset& dataset, Index side) {
  std::vector<RamanFigure<double>> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.spectra()) out.push_back(spectrum_figure(s, side));
  return out;
}

namespace {

Tensor gather(const Tensor& all, const std::vector<Index>& order, std::size_t begin, std::size_t end) {
  const Index stride = all.size() / all.dim(0);
  Tensor::Shape shape = all.shape();
  shape[0] = static_cast<Index>(end - begin);
  Tensor out(shape);
  for (std::size_t i = begin; i < end; ++i) {
    out.flat().segment(static_cast<Index>(i - begin) * stride, stride) =
        all.flat().segment(order[i] * stride, stride);
  }
  return out;
}

}  // namespace

int codebook_usage(VqVaeModel& model, const Tensor& x) {
  QuantizedBatch q = model.quantize_batch(model.encode_batch(x));
  return static_cast<int>(std::set<int>(q.indices.begin(), q.indices.end()).size());
}

VqTrainLog train_vqvae(VqVaeModel& model, const std::vector<RamanFigure<double>>& figures,
                       const VqTrainConfig& config) {
  if (figures.empty()) throw ArgumentError("train_vqvae: no training figures");
  if (config.epochs < 0 || config.batch_size < 1) {
    throw ArgumentError("train_vqvae: epochs must be >= 0 and batch size >= 1");
  }
  VqTrainLog log;
  if (config.epochs == 0) return log;

  const Tensor all = figures_to_batch(figures);
  nn::Rng rng(config.seed);
  if (config.seed_codebook_from_data && !model.codebook_seeded()) {
    model.init_codebook_from(all, rng);
  }
  log.initial_reconstruction_mse = model.evaluate(all).reconstruction;

  nn::AdamState adam(config.learning_rate);
  nn::ParamStore params = model.parameters();
  params.zero_grad();
  std::vector<Index> order(static_cast<std::size_t>(all.dim(0)));
  std::iota(order.begin(), order.end(), Index(0));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    VqEpochStats stats;
    stats.epoch = epoch;
    Real weight_sum = 0;
    int batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      ++batch_no;
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      VqLossParts parts = model.loss_and_grad(gather(all, order, begin, end));
      if (!std::isfinite(parts.total)) {
        throw TrainingError("train_vqvae: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_no));
      }
      nn::adam_step(adam, params);
      const Real w = Real(end - begin);
      stats.mean.total += w * parts.total;
      stats.mean.reconstruction += w * parts.reconstruction;
      stats.mean.codebook += w * parts.codebook;
      stats.mean.commitment += w * parts.commitment;
      weight_sum += w;
    }
    stats.mean.total /= weight_sum;
    stats.mean.reconstruction /= weight_sum;
    stats.mean.codebook /= weight_sum;
    stats.mean.commitment /= weight_sum;
    log.epochs.push_back(stats);
  }
  log.final_reconstruction_mse = model.evaluate(all).reconstruction;
  log.epochs.back().codes_used = codebook_usage(model, all);
  return log;
}

}  // namespace spectradiff::vq
