#include "subdivnet/nn/train.h"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <random>

#include "subdivnet/error.h"

namespace subdivnet::nn {

namespace {

std::vector<const Sample*> slice(std::span<const Sample> samples, const std::vector<int>& order, std::size_t lo,
                                 std::size_t hi) {
  std::vector<const Sample*> out;
  for (std::size_t i = lo; i < hi; ++i) out.push_back(&samples[order[i]]);
  return out;
}

const std::vector<int>& targets(const Model& model, const Batch& batch) {
  if (model.task() == Task::Classify) {
    for (int l : batch.labels) {
      if (l < 0) throw Error("classification sample without a label");
    }
    return batch.labels;
  }
  if (batch.face_labels.empty()) throw Error("segmentation sample without face labels");
  return batch.face_labels;
}

}  // namespace

std::string to_json_line(const EpochLog& log) {
  return nlohmann::json{{"epoch", log.epoch}, {"loss", log.loss}, {"accuracy", log.accuracy}}.dump();
}

void Optimizer::step(std::vector<Parameter>& params) {
  if (first_.empty()) {
    for (const Parameter& p : params) {
      first_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      second_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (first_.size() != params.size()) throw Error("optimizer used with a different parameter set");
  ++steps_;
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Matrix g = p.grad;
    if (options_.weight_decay != 0) g += options_.weight_decay * p.value;
    if (options_.optimizer == OptimizerKind::Sgd) {
      first_[i] = options_.momentum * first_[i] + g;
      p.value -= lr * first_[i];
    } else {
      first_[i] = options_.beta1 * first_[i] + (1 - options_.beta1) * g;
      second_[i] = options_.beta2 * second_[i] + (1 - options_.beta2) * g.cwiseProduct(g);
      const double c1 = 1 - std::pow(options_.beta1, static_cast<double>(steps_));
      const double c2 = 1 - std::pow(options_.beta2, static_cast<double>(steps_));
      p.value.array() -= lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + options_.adam_eps);
    }
    p.zero_grad();
  }
}

std::vector<EpochLog> train(Model& model, std::span<const Sample> samples, const TrainOptions& options,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  if (samples.empty()) throw Error("empty training set");
  if (options.batch_size < 1) throw Error("batch size must be positive");
  if (options.fit_normalization) model.fit_input_normalization(samples);
  const auto specs = model.conv_specs();
  warm_cache(samples, specs);
  for (Parameter& p : model.parameters()) p.zero_grad();

  Optimizer opt(options);
  std::mt19937_64 rng(options.seed);
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> logs;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    long long correct = 0, total = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += options.batch_size) {
      const auto members = slice(samples, order, lo, std::min(order.size(), lo + options.batch_size));
      const Batch batch = make_batch(members, specs);
      const std::vector<int>& y = targets(model, batch);
      Tape tape;
      const Var logits = model.forward(tape, batch, true);
      const Var loss = softmax_cross_entropy(logits, y);
      tape.backward(loss);
      opt.step(model.parameters());
      const auto pred = argmax_rows(logits.value());
      for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
      total += static_cast<long long>(y.size());
      loss_sum += loss.value()(0, 0) * static_cast<double>(y.size());
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(total), static_cast<double>(correct) / static_cast<double>(total)};
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

std::vector<std::vector<int>> predict(Model& model, std::span<const Sample> samples, int batch_size) {
  if (samples.empty()) throw Error("empty dataset");
  if (batch_size < 1) throw Error("batch size must be positive");
  const auto specs = model.conv_specs();
  warm_cache(samples, specs);
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<int>> out;
  for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
    const auto members = slice(samples, order, lo, std::min(order.size(), lo + batch_size));
    const Batch batch = make_batch(members, specs);
    Tape tape;
    const auto pred = argmax_rows(model.forward(tape, batch, false).value());
    for (int s = 0; s < batch.samples(); ++s) {
      if (model.task() == Task::Classify) {
        out.push_back({pred[s]});
      } else {
        const auto& off = batch.offsets[batch.depth];
        out.emplace_back(pred.begin() + off[s], pred.begin() + off[s + 1]);
      }
    }
  }
  return out;
}

int vote_mode(std::span<const int> predictions) {
  if (predictions.empty()) throw Error("cannot vote over no predictions");
  std::map<int, int> counts;
  for (int p : predictions) ++counts[p];
  int best = counts.begin()->first, best_count = 0;
  for (const auto& [label, n] : counts) {
    if (n > best_count) {
      best = label;
      best_count = n;
    }
  }
  return best;
}

Evaluation evaluate(Model& model, std::span<const Sample> samples, bool vote, int batch_size) {
  const auto pred = predict(model, samples, batch_size);
  std::map<int, std::pair<int, int>> per_class;  // label -> (correct, total)
  long long correct = 0, total = 0;
  auto count = [&](int truth, int guess) {
    auto& [c, t] = per_class[truth];
    ++t;
    total++;
    if (truth == guess) {
      ++c;
      ++correct;
    }
  };
  if (model.task() == Task::Segment) {
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (samples[s].face_labels.size() != pred[s].size()) throw Error("sample " + samples[s].shape_id + " lacks face labels");
      for (std::size_t f = 0; f < pred[s].size(); ++f) count(samples[s].face_labels[f], pred[s][f]);
    }
  } else if (!vote) {
    for (std::size_t s = 0; s < samples.size(); ++s) count(samples[s].label, pred[s][0]);
  } else {
    std::vector<std::string> shapes;
    std::map<std::string, std::vector<int>> votes;
    std::map<std::string, int> truth;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const std::string& id = samples[s].shape_id;
      if (!votes.count(id)) {
        shapes.push_back(id);
        truth[id] = samples[s].label;
      } else if (truth[id] != samples[s].label) {
        throw Error("variants of shape " + id + " disagree on the label");
      }
      votes[id].push_back(pred[s][0]);
    }
    for (const std::string& id : shapes) count(truth[id], vote_mode(votes[id]));
  }
  Evaluation e;
  e.count = static_cast<int>(total);
  e.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  for (const auto& [label, ct] : per_class) e.per_class_accuracy[label] = static_cast<double>(ct.first) / ct.second;
  return e;
}

std::string to_json(const Evaluation& e) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [label, acc] : e.per_class_accuracy) per[std::to_string(label)] = acc;
  return nlohmann::json{{"accuracy", e.accuracy}, {"count", e.count}, {"per_class_accuracy", per}}.dump(2);
}

}  // namespace subdivnet::nn
