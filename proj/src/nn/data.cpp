#include "subdivnet/nn/data.h"

#include <set>

#include "subdivnet/error.h"
#include "subdivnet/features.h"
#include "subdivnet/parallel.h"

namespace subdivnet::nn {

const KernelIndexBuffer& Sample::buffer(const ConvSpec& spec) const {
  auto it = buffers_.find(spec);
  if (it == buffers_.end()) {
    it = buffers_.emplace(spec, compile_index_buffer(pyramid, spec.level, spec.kernel, spec.dilation, spec.stride))
             .first;
  }
  return it->second;
}

const BilinearStencil& Sample::stencil(int level) const {
  auto it = stencils_.find(level);
  if (it == stencils_.end()) {
    it = stencils_.emplace(level, bilinear_stencil(pyramid.face_map(level), pyramid.level(level))).first;
  }
  return it->second;
}

FeatureTensor pyramid_features(const MeshPyramid& pyramid) {
  FeatureTensor f = compute_features(normalize_unit_cube(pyramid.finest())).values;
  f.level = pyramid.depth();
  return f;
}

void warm_cache(std::span<const Sample> samples, std::span<const ConvSpec> specs) {
  parallel_for(
      0, static_cast<int>(samples.size()),
      [&](int i) {
        const Sample& s = samples[i];
        for (const ConvSpec& spec : specs) {
          if (spec.level <= s.pyramid.depth()) s.buffer(spec);
        }
        for (int l = 1; l <= s.pyramid.depth(); ++l) s.stencil(l);
      },
      1);
}

const Neighborhood& Batch::neighborhood(const ConvSpec& spec) const {
  auto it = neighborhoods.find(spec);
  if (it == neighborhoods.end()) {
    throw Error("batch has no index buffer for level " + std::to_string(spec.level) + " k " +
                std::to_string(spec.kernel) + " d " + std::to_string(spec.dilation) + " stride " +
                std::to_string(spec.stride));
  }
  return it->second;
}

Batch make_batch(std::span<const Sample* const> samples, std::span<const ConvSpec> specs) {
  if (samples.empty()) throw ShapeError("empty batch");
  Batch b;
  b.depth = samples[0]->pyramid.depth();
  const int channels = samples[0]->features.cols();
  for (const Sample* s : samples) {
    if (s->pyramid.depth() != b.depth) throw ShapeError("samples in a batch must share the pyramid depth");
    if (s->features.cols() != channels) throw ShapeError("samples in a batch must share the channel count");
    if (s->features.rows() != s->pyramid.finest().face_count()) {
      throw ShapeError("sample " + s->shape_id + ": feature rows do not match the finest level");
    }
  }
  const int n = static_cast<int>(samples.size());
  const int depth = b.depth;

  b.offsets.assign(depth + 1, std::vector<int>(n + 1, 0));
  for (int l = 0; l <= depth; ++l) {
    for (int s = 0; s < n; ++s) b.offsets[l][s + 1] = b.offsets[l][s] + samples[s]->pyramid.level(l).face_count();
  }

  b.input.resize(b.rows(depth), channels);
  for (int s = 0; s < n; ++s) {
    const auto& data = samples[s]->features.data();
    const int rows = samples[s]->features.rows();
    b.input.middleRows(b.offsets[depth][s], rows) =
        Eigen::Map<const Matrix>(data.data(), rows, channels);
    b.labels.push_back(samples[s]->label);
  }
  if (std::all_of(samples.begin(), samples.end(), [](const Sample* s) { return !s->face_labels.empty(); })) {
    for (const Sample* s : samples) {
      if (static_cast<int>(s->face_labels.size()) != s->pyramid.finest().face_count()) {
        throw ShapeError("sample " + s->shape_id + ": face label count does not match the finest level");
      }
      b.face_labels.insert(b.face_labels.end(), s->face_labels.begin(), s->face_labels.end());
    }
  }

  b.children.resize(depth + 1);
  b.parent.resize(depth + 1);
  b.stencil_source.resize(depth + 1);
  b.stencil_weight.resize(depth + 1);
  for (int l = 1; l <= depth; ++l) {
    for (int s = 0; s < n; ++s) {
      const FaceMap& map = samples[s]->pyramid.face_map(l);
      const int fine = b.offsets[l][s], coarse = b.offsets[l - 1][s];
      for (auto c : map.children) {
        for (int& f : c) f += fine;
        b.children[l].push_back(c);
      }
      for (int p : map.parent_of) b.parent[l].push_back(p + coarse);
      const BilinearStencil& st = samples[s]->stencil(l);
      for (std::size_t f = 0; f < st.source.size(); ++f) {
        auto src = st.source[f];
        for (int& q : src) {
          if (q >= 0) q += coarse;
        }
        b.stencil_source[l].push_back(src);
        b.stencil_weight[l].push_back(st.weight[f]);
      }
    }
  }

  for (const ConvSpec& spec : std::set<ConvSpec>(specs.begin(), specs.end())) {
    if (spec.level < 0 || spec.level > depth || (spec.stride == 2 && spec.level < 1)) {
      throw ShapeError("convolution level " + std::to_string(spec.level) + " outside the pyramid");
    }
    Neighborhood nb;
    nb.input_rows = b.rows(spec.level);
    for (int s = 0; s < n; ++s) {
      const KernelIndexBuffer& buf = samples[s]->buffer(spec);
      nb.row_length = buf.row_length;
      const int off = b.offsets[spec.level][s];
      for (int a : buf.anchors) nb.anchor.push_back(a + off);
      for (int q : buf.indices) nb.index.push_back(q + off);
    }
    b.neighborhoods.emplace(spec, std::move(nb));
  }
  return b;
}

}  // namespace subdivnet::nn
