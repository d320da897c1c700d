#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "subdivnet/nn/model.h"

namespace subdivnet::nn {

enum class OptimizerKind { Sgd, Adam };

struct TrainOptions {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  /// SGD momentum.
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  int epochs = 50;
  int batch_size = 8;
  std::uint64_t seed = 0;
  /// Refit the model's input standardization on the training set first.
  bool fit_normalization = true;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0;
  /// Training accuracy over the epoch (per sample or per face).
  double accuracy = 0;
};

/// {"epoch": .., "loss": .., "accuracy": ..}
std::string to_json_line(const EpochLog& log);

/// SGD with momentum or Adam with bias correction; state is kept per parameter index.
class Optimizer {
 public:
  explicit Optimizer(const TrainOptions& options) : options_(options) {}
  /// Applies one update from the accumulated gradients and zeroes them.
  void step(std::vector<Parameter>& params);

 private:
  TrainOptions options_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  long long steps_ = 0;
};

/// Mini-batch training, shuffled per epoch from `options.seed`. Deterministic for a
/// fixed seed. Throws Error on an empty dataset or missing labels.
std::vector<EpochLog> train(Model& model, std::span<const Sample> samples, const TrainOptions& options,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Eval-mode predictions: one class per sample (classifier) or one per finest face (segmenter).
std::vector<std::vector<int>> predict(Model& model, std::span<const Sample> samples, int batch_size = 8);

/// Most frequent value; ties go to the smallest. Throws on empty input.
int vote_mode(std::span<const int> predictions);

struct Evaluation {
  double accuracy = 0;
  std::map<int, double> per_class_accuracy;
  /// Units counted: samples, voted shapes, or faces.
  int count = 0;
};

/// With `vote`, classification samples sharing a shape_id are one prediction: the
/// mode over their variants. Segmentation accuracy is per face and ignores `vote`.
Evaluation evaluate(Model& model, std::span<const Sample> samples, bool vote, int batch_size = 8);

std::string to_json(const Evaluation& e);

}  // namespace subdivnet::nn
