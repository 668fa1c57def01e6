#pragma once

#include "spectradiff/nn/layers.hpp"
#include "spectradiff/spectra_io.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spectradiff::classify {

using nn::Index;
using nn::Real;
using nn::Tensor;

struct ConvStage {
  Index channels;
  Index kernel;
  Index stride;
};

struct ClassifierConfig {
  std::vector<ConvStage> stages{{16, 7, 2}, {32, 5, 2}, {32, 5, 2}};
  Index hidden = 32;
  int class_count = 2;
  int max_epochs = 200;
  int patience = 10;
  int batch_size = 16;
  Real learning_rate = 1e-3;
  std::uint64_t seed = 0;
  Index input_length = 1024;

  void validate() const;
};

/// Spectra resampled to `length` and min-max scaled to [0, 1] per spectrum,
/// shaped [N, 1, 1, length].
Tensor prepare_inputs(const LabeledDataset& dataset, Index length);

/// 1-d CNN (conv + ReLU stages) -> global average pool -> hidden layer ->
/// class logits.
class Classifier {
 public:
  Classifier(const ClassifierConfig& config, std::uint64_t seed);

  Tensor logits(const Tensor& inputs);
  void backward(const Tensor& grad_logits);
  nn::ParamStore parameters();

  std::vector<int> predict(const Tensor& inputs);
  /// Mean cross-entropy on prepared inputs.
  Real loss(const Tensor& inputs, std::span<const int> labels);

  int class_count() const { return class_count_; }
  Index input_length() const { return input_length_; }

  std::vector<Tensor> snapshot();
  void restore(const std::vector<Tensor>& weights);

 private:
  int class_count_;
  Index input_length_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::Activation> acts_;
  nn::Linear hidden_, head_;
  nn::Activation hidden_act_{nn::ActivationKind::ReLU};
  Tensor::Shape pooled_from_;
};

/// Tracks the best monitor loss; `update` returns true when training should
/// stop (no strict improvement for `patience` consecutive epochs).
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  bool update(int epoch, Real monitor_loss);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  Real best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  int since_best_ = 0;
  bool improved_ = false;
  Real best_loss_ = 0;
};

struct TrainLog {
  std::vector<Real> train_loss;
  std::vector<Real> monitor_loss;
  int best_epoch = 0;
  int stopped_epoch = 0;
  Real best_monitor_loss = 0;
};

struct TrainedClassifier {
  Classifier model;
  TrainLog log;
};

/// Cross-entropy + Adam with early stopping on `monitor`; the returned model
/// holds the weights of the best monitor epoch.
TrainedClassifier train_classifier(const LabeledDataset& train, const LabeledDataset& monitor,
                                   const ClassifierConfig& config);

/// Rows are true classes, columns predicted classes.
struct EvalReport {
  Real accuracy = 0;
  Eigen::VectorXd per_class_accuracy;
  Eigen::MatrixXi confusion;
};

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                int class_count);
EvalReport evaluate(Classifier& classifier, const LabeledDataset& test);

enum class MonitorMode { Validation, Test };

struct ExperimentResult {
  Real mean = 0;
  Real sd = 0;
  std::vector<Real> per_trial;
  std::vector<EvalReport> reports;
};

/// Per class, `fraction` of the spectra (at least one when the class has two
/// or more) go to the second dataset.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& dataset,
                                                           double fraction, std::uint64_t seed);

/// Trains on real (+ synthetic) for `trials` seeds (config.seed + trial) and
/// evaluates on `test`. In Validation mode 20% of the real spectra are held
/// out per trial to drive early stopping; Test mode monitors the test set.
ExperimentResult augmentation_experiment(const LabeledDataset& real,
                                         const std::optional<LabeledDataset>& synthetic,
                                         const LabeledDataset& test, const ClassifierConfig& config,
                                         int trials, MonitorMode mode = MonitorMode::Validation);

std::string format_experiment_csv(const ExperimentResult& result);
std::string format_confusion_csv(const EvalReport& report, const std::vector<std::string>& names);

}  // namespace spectradiff::classify
