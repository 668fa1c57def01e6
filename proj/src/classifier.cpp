#include "spectradiff/classifier.hpp"

#include "spectradiff/errors.hpp"
#include "spectradiff/figure.hpp"
#include "spectradiff/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spectradiff::classify {

void ClassifierConfig::validate() const {
  if (stages.empty()) throw ConfigError("classifier: need at least one conv stage");
  for (const auto& s : stages) {
    if (s.channels < 1 || s.kernel < 1 || s.stride < 1) {
      throw ConfigError("classifier: conv stages need positive channels, kernel and stride");
    }
  }
  if (hidden < 1) throw ConfigError("classifier: hidden width must be >= 1");
  if (class_count < 2) throw ConfigError("classifier: class_count must be >= 2");
  if (patience < 1) throw ConfigError("classifier: patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("classifier: max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("classifier: batch_size must be >= 1");
  if (input_length < 2) throw ConfigError("classifier: input_length must be >= 2");
}

Tensor prepare_inputs(const LabeledDataset& dataset, Index length) {
  Tensor out({static_cast<Index>(dataset.size()), 1, 1, length});
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Eigen::VectorXd v = interpolate_spectrum(dataset[i], length);
    const double lo = v.minCoeff(), hi = v.maxCoeff();
    if (hi > lo) {
      v = (v.array() - lo) / (hi - lo);
    } else {
      v.setZero();
    }
    out.flat().segment(static_cast<Index>(i) * length, length) = v;
  }
  return out;
}

// Classifier --------------------------------------------------------------------

Classifier::Classifier(const ClassifierConfig& config, std::uint64_t seed)
    : class_count_(config.class_count), input_length_(config.input_length) {
  config.validate();
  nn::Rng rng(seed);
  Index in = 1;
  for (const auto& s : config.stages) {
    convs_.emplace_back(in, s.channels, 1, s.kernel, nn::ConvParams{1, s.stride, 0, s.kernel / 2}, rng);
    acts_.emplace_back(nn::ActivationKind::ReLU);
    in = s.channels;
  }
  hidden_ = nn::Linear(in, config.hidden, rng);
  head_ = nn::Linear(config.hidden, config.class_count, rng);
}

Tensor Classifier::logits(const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != 1 || x.dim(3) != input_length_) {
    throw ShapeError("classifier: expected [N, 1, 1, " + std::to_string(input_length_) +
                     "], got " + nn::shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) h = acts_[i].forward(convs_[i].forward(h));
  pooled_from_ = h.shape();
  h = hidden_act_.forward(hidden_.forward(nn::global_avg_pool(h)));
  return head_.forward(h);
}

void Classifier::backward(const Tensor& grad_logits) {
  Tensor g = hidden_.backward(hidden_act_.backward(head_.backward(grad_logits)));
  g = nn::global_avg_pool_backward(pooled_from_, g);
  for (std::size_t i = convs_.size(); i-- > 0;) g = convs_[i].backward(acts_[i].backward(g));
}

nn::ParamStore Classifier::parameters() {
  nn::ParamStore store;
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(store, "conv" + std::to_string(i));
  hidden_.collect(store, "hidden");
  head_.collect(store, "head");
  return store;
}

std::vector<int> Classifier::predict(const Tensor& inputs) {
  Tensor z = logits(inputs);
  auto m = z.matrix();
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    Index arg = 0;
    m.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

Real Classifier::loss(const Tensor& inputs, std::span<const int> labels) {
  return nn::cross_entropy(logits(inputs), labels).value;
}

std::vector<Tensor> Classifier::snapshot() {
  std::vector<Tensor> out;
  for (const auto& [_, p] : parameters()) out.push_back(p->value);
  return out;
}

void Classifier::restore(const std::vector<Tensor>& weights) {
  auto store = parameters();
  if (weights.size() != store.size()) throw ArgumentError("classifier: snapshot size mismatch");
  std::size_t i = 0;
  for (const auto& [_, p] : store) p->value = weights[i++];
}

// Early stopping ----------------------------------------------------------------

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw ArgumentError("early stopping: patience must be >= 1");
}

bool EarlyStopping::update(int epoch, Real monitor_loss) {
  improved_ = best_epoch_ == 0 || monitor_loss < best_loss_;
  if (improved_) {
    best_loss_ = monitor_loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return false;
  }
  return ++since_best_ >= patience_;
}

// Training ----------------------------------------------------------------------

TrainedClassifier train_classifier(const LabeledDataset& train, const LabeledDataset& monitor,
                                   const ClassifierConfig& config) {
  config.validate();
  if (train.empty() || monitor.empty()) {
    throw ArgumentError("train_classifier: training and monitor sets must be non-empty");
  }
  if (train.class_names() != monitor.class_names() || train.class_count() != config.class_count) {
    throw ArgumentError("train_classifier: class registries of train/monitor/config differ");
  }
  const Tensor x_train = prepare_inputs(train, config.input_length);
  const Tensor x_monitor = prepare_inputs(monitor, config.input_length);
  const std::vector<int> y_train = train.labels();
  const std::vector<int> y_monitor = monitor.labels();
  const Index stride = config.input_length;

  TrainedClassifier out{Classifier(config, config.seed), {}};
  Classifier& model = out.model;
  nn::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  nn::AdamState adam(config.learning_rate);
  nn::ParamStore params = model.parameters();
  params.zero_grad();
  EarlyStopping stopper(config.patience);
  std::vector<Tensor> best = model.snapshot();

  std::vector<Index> order(y_train.size());
  std::iota(order.begin(), order.end(), Index(0));
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    Real total = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      Tensor batch({static_cast<Index>(end - begin), 1, 1, stride});
      std::vector<int> labels;
      for (std::size_t i = begin; i < end; ++i) {
        batch.flat().segment(static_cast<Index>(i - begin) * stride, stride) =
            x_train.flat().segment(order[i] * stride, stride);
        labels.push_back(y_train[static_cast<std::size_t>(order[i])]);
      }
      nn::LossResult ce = nn::cross_entropy(model.logits(batch), labels);
      if (!std::isfinite(ce.value)) {
        throw TrainingError("train_classifier: non-finite loss at epoch " + std::to_string(epoch));
      }
      model.backward(ce.grad);
      nn::adam_step(adam, params);
      total += ce.value * Real(end - begin);
    }
    out.log.train_loss.push_back(total / Real(order.size()));
    const Real monitor_loss = model.loss(x_monitor, y_monitor);
    out.log.monitor_loss.push_back(monitor_loss);
    out.log.stopped_epoch = epoch;
    const bool stop = stopper.update(epoch, monitor_loss);
    if (stopper.improved()) best = model.snapshot();
    if (stop) break;
  }
  model.restore(best);
  out.log.best_epoch = stopper.best_epoch();
  out.log.best_monitor_loss = stopper.best_loss();
  return out;
}

// Evaluation --------------------------------------------------------------------

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                int class_count) {
  if (truth.empty()) throw ArgumentError("evaluate: empty test set");
  if (truth.size() != predicted.size()) throw ArgumentError("evaluate: prediction count mismatch");
  EvalReport r;
  r.confusion = Eigen::MatrixXi::Zero(class_count, class_count);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= class_count || predicted[i] < 0 || predicted[i] >= class_count) {
      throw ArgumentError("evaluate: label outside [0, class_count)");
    }
    ++r.confusion(truth[i], predicted[i]);
  }
  r.accuracy = Real(r.confusion.trace()) / Real(truth.size());
  r.per_class_accuracy = Eigen::VectorXd::Zero(class_count);
  for (int c = 0; c < class_count; ++c) {
    const int row = r.confusion.row(c).sum();
    if (row > 0) r.per_class_accuracy[c] = Real(r.confusion(c, c)) / Real(row);
  }
  return r;
}

EvalReport evaluate(Classifier& classifier, const LabeledDataset& test) {
  if (test.empty()) throw ArgumentError("evaluate: empty test set");
  if (test.class_count() != classifier.class_count()) {
    throw ArgumentError("evaluate: test class registry differs from classifier");
  }
  const auto predicted = classifier.predict(prepare_inputs(test, classifier.input_length()));
  const auto truth = test.labels();
  return evaluate_predictions(truth, predicted, classifier.class_count());
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& dataset,
                                                           double fraction, std::uint64_t seed) {
  if (!(fraction >= 0 && fraction < 1)) throw ArgumentError("split: fraction must be in [0, 1)");
  nn::Rng rng(seed);
  LabeledDataset keep(dataset.grid(), dataset.class_names());
  LabeledDataset held(dataset.grid(), dataset.class_names());
  for (int c = 0; c < dataset.class_count(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (*dataset[i].label() == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t n_held = static_cast<std::size_t>(std::round(fraction * double(members.size())));
    if (fraction > 0 && members.size() >= 2) n_held = std::max<std::size_t>(n_held, 1);
    n_held = std::min(n_held, members.empty() ? 0 : members.size() - 1);
    std::sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_held));
    std::sort(members.begin() + static_cast<std::ptrdiff_t>(n_held), members.end());
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < n_held ? held : keep).add(dataset[members[k]]);
    }
  }
  return {std::move(keep), std::move(held)};
}

ExperimentResult augmentation_experiment(const LabeledDataset& real,
                                         const std::optional<LabeledDataset>& synthetic,
                                         const LabeledDataset& test, const ClassifierConfig& config,
                                         int trials, MonitorMode mode) {
  if (trials < 1) throw ArgumentError("augmentation_experiment: trials must be >= 1");
  ExperimentResult result;
  for (int trial = 0; trial < trials; ++trial) {
    ClassifierConfig cfg = config;
    cfg.seed = config.seed + static_cast<std::uint64_t>(trial);
    LabeledDataset train = real;
    LabeledDataset monitor = test;
    if (mode == MonitorMode::Validation) {
      auto [keep, held] = stratified_split(real, 0.2, cfg.seed);
      train = std::move(keep);
      monitor = std::move(held);
      if (monitor.empty()) throw ArgumentError("augmentation_experiment: validation split is empty");
    }
    if (synthetic) train = train.merged(*synthetic);
    TrainedClassifier trained = train_classifier(train, monitor, cfg);
    EvalReport report = evaluate(trained.model, test);
    result.per_trial.push_back(report.accuracy);
    result.reports.push_back(std::move(report));
  }
  const auto n = static_cast<Real>(trials);
  result.mean = std::accumulate(result.per_trial.begin(), result.per_trial.end(), Real(0)) / n;
  if (trials > 1) {
    Real ss = 0;
    for (Real a : result.per_trial) ss += (a - result.mean) * (a - result.mean);
    result.sd = std::sqrt(ss / (n - 1));
  }
  return result;
}

std::string format_experiment_csv(const ExperimentResult& result) {
  std::string out = "trial,accuracy\n";
  for (std::size_t i = 0; i < result.per_trial.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_real(result.per_trial[i]) + "\n";
  }
  out += "mean," + format_real(result.mean) + "\n";
  out += "sd," + format_real(result.sd) + "\n";
  return out;
}

std::string format_confusion_csv(const EvalReport& report, const std::vector<std::string>& names) {
  std::string out = "true\\predicted";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (Index r = 0; r < report.confusion.rows(); ++r) {
    out += names[static_cast<std::size_t>(r)];
    for (Index c = 0; c < report.confusion.cols(); ++c) out += "," + std::to_string(report.confusion(r, c));
    out += "\n";
  }
  return out;
}

}  // namespace spectradiff::classify
