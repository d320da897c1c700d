#pragma once

#include <array>
#include <compare>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "subdivnet/feature_tensor.h"
#include "subdivnet/hierarchy.h"
#include "subdivnet/nn/autograd.h"
#include "subdivnet/patterns.h"

namespace subdivnet::nn {

/// Identifies the index buffer a convolution reads: input level, kernel size,
/// dilation and stride.
struct ConvSpec {
  int level = 0;
  int kernel = 3;
  int dilation = 1;
  int stride = 1;

  int output_level() const { return stride == 2 ? level - 1 : level; }
  auto operator<=>(const ConvSpec&) const = default;
};

enum class Task { Classify, Segment };

/// One remeshed shape: its pyramid, finest-level input features and labels.
struct Sample {
  std::string shape_id;
  MeshPyramid pyramid;
  FeatureTensor features;
  int label = -1;
  /// Per finest face, for segmentation.
  std::vector<int> face_labels;

  /// Index buffer for `spec`, compiled on first use and cached.
  const KernelIndexBuffer& buffer(const ConvSpec& spec) const;
  /// Bilinear stencil from level - 1 to `level`, cached.
  const BilinearStencil& stencil(int level) const;

 private:
  mutable std::map<ConvSpec, KernelIndexBuffer> buffers_;
  mutable std::map<int, BilinearStencil> stencils_;
};

/// Features of the pyramid's finest level after normalize_unit_cube.
FeatureTensor pyramid_features(const MeshPyramid& pyramid);

/// Compiles every buffer and stencil the given specs need, in parallel over samples.
void warm_cache(std::span<const Sample> samples, std::span<const ConvSpec> specs);

/// Several samples stacked row-wise per level. Index structures are offset so a
/// layer processes the whole batch as one tensor; no padding rows exist.
struct Batch {
  int depth = 0;
  /// offsets[level] has samples + 1 entries; sample s owns rows [offsets[s], offsets[s+1]).
  std::vector<std::vector<int>> offsets;
  /// Finest-level features, rows stacked.
  Matrix input;
  std::map<ConvSpec, Neighborhood> neighborhoods;
  /// Indexed by the finer level l >= 1; entry 0 is empty.
  std::vector<std::vector<std::array<int, 4>>> children;
  std::vector<std::vector<int>> parent;
  std::vector<std::vector<std::array<int, 3>>> stencil_source;
  std::vector<std::vector<std::array<double, 3>>> stencil_weight;
  /// Per sample class labels.
  std::vector<int> labels;
  /// Per finest face labels (segmentation).
  std::vector<int> face_labels;

  int samples() const { return static_cast<int>(labels.size()); }
  int rows(int level) const { return offsets.at(level).back(); }
  const Neighborhood& neighborhood(const ConvSpec& spec) const;
};

/// All samples must share the pyramid depth and channel count. Throws ShapeError otherwise.
Batch make_batch(std::span<const Sample* const> samples, std::span<const ConvSpec> specs);

}  // namespace subdivnet::nn
