#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "subdivnet/nn/autograd.h"
#include "subdivnet/nn/data.h"

namespace subdivnet::nn {

enum class ModelKind { Classifier, Segmenter };

/// Classifier: `channels` holds one entry per pyramid level from the finest
/// down, starting with the input channel count, e.g. 13, 32, 64, 128 for depth 3.
/// Segmenter: `channels` is (input channels, width).
struct ModelConfig {
  ModelKind kind = ModelKind::Classifier;
  int depth = 3;
  std::vector<int> channels{kInputChannels, 32, 64, 128};
  int classes = 2;
  bool conv_bias = true;

  static constexpr int kInputChannels = 13;
};

struct ConvLayer {
  ConvSpec spec;
  int in = 0;
  int out = 0;
  std::array<int, 4> weights{};  // parameter indices
  int bias = -1;                 // -1 when the layer has no bias
};

struct BatchNormLayer {
  int gamma = -1;
  int beta = -1;
  BatchNormStats stats;
};

struct LinearLayer {
  int weight = -1;
  int bias = -1;
};

/// Parameters and layer layout of one of the two reference networks.
class Model {
 public:
  /// Weights drawn from `seed`. Throws Error on an invalid configuration.
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Task task() const { return config_.kind == ModelKind::Classifier ? Task::Classify : Task::Segment; }

  /// Logits: one row per sample (classifier) or per finest face (segmenter).
  Var forward(Tape& tape, const Batch& batch, bool training);

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  std::vector<BatchNormLayer>& batch_norms() { return bns_; }
  const std::vector<ConvLayer>& convs() const { return convs_; }

  /// Index buffers forward() reads.
  std::vector<ConvSpec> conv_specs() const;

  /// Per-channel input standardization applied before the first layer.
  Matrix input_mean;
  Matrix input_inv_std;
  /// Sets the standardization from the finest-level features of `samples`.
  void fit_input_normalization(std::span<const Sample> samples);

  void write(std::ostream& out) const;
  static Model read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  int add_parameter(const std::string& name, Matrix value);
  int add_conv(ConvSpec spec, int in, int out, std::mt19937_64& rng);
  int add_bn(int channels);
  int add_linear(int in, int out, std::mt19937_64& rng);
  Var conv(Tape& tape, Var x, const Batch& batch, int index);
  Var conv_bn_relu(Tape& tape, Var x, const Batch& batch, int index, bool training);
  Var bn(Tape& tape, Var x, int index, bool training);
  Var linear(Tape& tape, Var x, int index);
  Var forward_classifier(Tape& tape, Var x, const Batch& batch, bool training);
  Var forward_segmenter(Tape& tape, Var x, const Batch& batch, bool training);

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::vector<ConvLayer> convs_;
  std::vector<BatchNormLayer> bns_;
  std::vector<LinearLayer> linears_;
};

/// conv-bn-relu x2 at each level from the finest down, max-pool to the next
/// coarser level, global average pool at the base, linear head. Requires depth >= 2.
Model build_classifier(int depth, std::vector<int> channels, int classes, std::uint64_t seed = 0);

/// Stem conv at the finest level, two stride-2 convs, residual blocks with
/// dilations 1, 2, 4 two levels down, then two bilinear upsampling stages with
/// skip connections and a per-face linear head. Requires depth >= 2.
Model build_segmenter(int depth, int input_channels, int width, int classes, std::uint64_t seed = 0);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace subdivnet::nn
