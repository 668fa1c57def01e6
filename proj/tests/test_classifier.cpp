#include "spectradiff/classifier.hpp"
#include "spectradiff/errors.hpp"

#include <doctest.h>

#include <random>

using namespace spectradiff;
using namespace spectradiff::classify;

namespace {

// Two classes with a peak at opposite ends of the grid.
LabeledDataset separable(int per_class, std::uint64_t seed) {
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(128, 400, 1800);
  LabeledDataset d(grid, {"left", "right"});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 0.05);
  for (int i = 0; i < per_class; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double center = c == 0 ? 700 : 1500;
      Eigen::VectorXd v = (-(grid.array() - center).square() / (2 * 40.0 * 40.0)).exp();
      for (auto& x : v) x += noise(rng);
      d.add(Spectrum(grid, v, c));
    }
  }
  return d;
}

ClassifierConfig small_config() {
  ClassifierConfig c;
  c.stages = {{4, 5, 2}, {8, 5, 2}};
  c.hidden = 8;
  c.class_count = 2;
  c.max_epochs = 60;
  c.patience = 10;
  c.batch_size = 8;
  c.input_length = 128;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("constant class-0 predictions on a balanced 4-class set") {
  const std::vector<int> truth{0, 1, 2, 3, 0, 1, 2, 3}, pred(8, 0);
  EvalReport r = evaluate_predictions(truth, pred, 4);
  CHECK(r.accuracy == 0.25);
  CHECK(r.confusion.col(0).sum() == 8);
  CHECK(r.confusion.rightCols(3).sum() == 0);
  CHECK(r.per_class_accuracy == Eigen::Vector4d(1, 0, 0, 0));
}

TEST_CASE("perfect predictions give a diagonal confusion matrix") {
  const std::vector<int> truth{0, 1, 2, 2, 1};
  EvalReport r = evaluate_predictions(truth, truth, 3);
  CHECK(r.accuracy == 1.0);
  CHECK(r.confusion == Eigen::Vector3i(1, 2, 2).asDiagonal().toDenseMatrix());
}

TEST_CASE("accuracy and row sums match an independent recount") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> pick(0, 4);
  std::vector<int> truth(200), pred(200);
  for (int i = 0; i < 200; ++i) truth[i] = pick(rng), pred[i] = pick(rng);
  EvalReport r = evaluate_predictions(truth, pred, 5);
  int hits = 0;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 200; ++i) hits += truth[i] == pred[i], ++counts[truth[i]];
  CHECK(r.accuracy == doctest::Approx(hits / 200.0).epsilon(1e-15));
  CHECK(double(r.confusion.trace()) / r.confusion.sum() == doctest::Approx(r.accuracy));
  for (int c = 0; c < 5; ++c) CHECK(r.confusion.row(c).sum() == counts[c]);
  const std::vector<int> empty;
  CHECK_THROWS_AS(evaluate_predictions(empty, empty, 5), ArgumentError);
}

TEST_CASE("patience 1 with rising monitor loss stops at epoch 2 keeping epoch 1") {
  EarlyStopping s(1);
  CHECK(!s.update(1, 0.5));
  CHECK(s.update(2, 0.6));
  CHECK(s.best_epoch() == 1);
  CHECK(s.best_loss() == 0.5);
}

TEST_CASE("early stopping needs strict improvement") {
  EarlyStopping s(3);
  CHECK(!s.update(1, 1.0));
  CHECK(!s.update(2, 1.0));
  CHECK(!s.update(3, 0.9));
  CHECK(s.improved());
  CHECK(!s.update(4, 0.9));
  CHECK(!s.update(5, 0.95));
  CHECK(s.update(6, 0.9));
  CHECK(s.best_epoch() == 3);
  CHECK_THROWS_AS(EarlyStopping(0), ArgumentError);
}

TEST_CASE("separable data reaches full training accuracy") {
  LabeledDataset d = separable(12, 2);
  ClassifierConfig c = small_config();
  c.max_epochs = 300;
  c.patience = 300;
  c.learning_rate = 1e-2;
  TrainedClassifier t = train_classifier(d, d, c);
  CHECK(evaluate(t.model, d).accuracy == 1.0);
}

TEST_CASE("returned weights come from the best monitor epoch") {
  LabeledDataset train = separable(8, 3), monitor = separable(4, 4);
  ClassifierConfig c = small_config();
  c.patience = 2;
  TrainedClassifier t = train_classifier(train, monitor, c);
  const auto& log = t.log;
  CHECK(log.stopped_epoch <= c.max_epochs);
  CHECK(log.best_epoch <= log.stopped_epoch);
  CHECK(log.monitor_loss[std::size_t(log.best_epoch - 1)] == log.best_monitor_loss);
  for (int e = log.best_epoch; e < log.stopped_epoch; ++e)
    CHECK(log.monitor_loss[std::size_t(e)] >= log.best_monitor_loss);
  Tensor x = prepare_inputs(monitor, c.input_length);
  CHECK(t.model.loss(x, monitor.labels()) == doctest::Approx(log.best_monitor_loss).epsilon(1e-12));
}

TEST_CASE("training is reproducible for a fixed seed") {
  LabeledDataset d = separable(6, 5);
  ClassifierConfig c = small_config();
  c.max_epochs = 5;
  TrainedClassifier a = train_classifier(d, d, c), b = train_classifier(d, d, c);
  CHECK(a.log.train_loss == b.log.train_loss);
  Tensor x = prepare_inputs(d, c.input_length);
  CHECK(a.model.logits(x).flat() == b.model.logits(x).flat());
}

TEST_CASE("class mismatch and bad config are argument errors") {
  LabeledDataset d = separable(2, 6);
  ClassifierConfig c = small_config();
  c.class_count = 3;
  CHECK_THROWS_AS(train_classifier(d, d, c), ArgumentError);
  c = small_config();
  c.patience = 0;
  CHECK_THROWS(c.validate());
  LabeledDataset empty(d.grid(), d.class_names());
  c = small_config();
  CHECK_THROWS_AS(train_classifier(d, empty, c), ArgumentError);
  TrainedClassifier t = [&] {
    c.max_epochs = 1;
    return train_classifier(d, d, c);
  }();
  CHECK_THROWS_AS(evaluate(t.model, empty), ArgumentError);
}

TEST_CASE("inputs are min-max scaled per spectrum") {
  LabeledDataset d = separable(2, 7);
  Tensor x = prepare_inputs(d, 64);
  CHECK(x.shape() == Tensor::Shape{4, 1, 1, 64});
  for (Index i = 0; i < 4; ++i) {
    auto row = x.flat().segment(i * 64, 64);
    CHECK(row.minCoeff() == 0.0);
    CHECK(row.maxCoeff() == 1.0);
  }
}

TEST_CASE("stratified split holds out a fraction per class") {
  LabeledDataset d = separable(10, 8);
  auto [keep, held] = stratified_split(d, 0.2, 1);
  CHECK(held.class_counts() == std::vector<std::size_t>{2, 2});
  CHECK(keep.class_counts() == std::vector<std::size_t>{8, 8});
  auto [k2, h2] = stratified_split(separable(2, 8), 0.2, 1);
  CHECK(h2.class_counts() == std::vector<std::size_t>{1, 1});
  CHECK(k2.class_counts() == std::vector<std::size_t>{1, 1});
  auto [k3, h3] = stratified_split(d, 0.2, 1);
  CHECK(k3 == keep);
}

TEST_CASE("single-trial experiment has zero sd and is deterministic") {
  LabeledDataset real = separable(6, 9), test = separable(5, 10);
  ClassifierConfig c = small_config();
  c.max_epochs = 8;
  ExperimentResult a = augmentation_experiment(real, std::nullopt, test, c, 1);
  CHECK(a.sd == 0.0);
  CHECK(a.per_trial.size() == 1);
  CHECK(a.mean == a.per_trial[0]);
  ExperimentResult b = augmentation_experiment(real, std::nullopt, test, c, 2, MonitorMode::Test);
  ExperimentResult b2 = augmentation_experiment(real, std::nullopt, test, c, 2, MonitorMode::Test);
  CHECK(b.per_trial == b2.per_trial);
  ExperimentResult s = augmentation_experiment(real, separable(3, 11), test, c, 1);
  CHECK(s.per_trial.size() == 1);
  const std::string csv = format_experiment_csv(b);
  CHECK(csv.rfind("trial,accuracy\n", 0) == 0);
}

TEST_CASE("confusion csv has a header and one row per class") {
  const std::vector<int> truth{0, 1, 1}, pred{0, 0, 1};
  const std::string csv = format_confusion_csv(evaluate_predictions(truth, pred, 2), {"a", "b"});
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
