#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "subdivnet/feature_tensor.h"
#include "subdivnet/mesh.h"

namespace subdivnet {

/// Channels per face: area, 3 angles, 3 curvature terms, center (3), unit normal (3).
inline constexpr int kFeatureChannels = 13;
/// The first kShapeChannels values are invariant under rigid motions.
inline constexpr int kShapeChannels = 7;

struct FaceFeatures {
  FeatureTensor values;
  /// Faces with area below 1e-12 * diagonal^2; their angles and normal are substitutes.
  std::vector<bool> degenerate;
};

/// Area-weighted unit vertex normals. The result does not depend on face order.
std::vector<Vec3> vertex_normals(const Mesh& mesh);

FaceFeatures compute_features(const Mesh& mesh);

/// Translates and uniformly scales so the bounding box sits in [0,1]^3 with its
/// longest side exactly 1.
Mesh normalize_unit_cube(const Mesh& mesh);

/// Per-axis scale factors and quarter turns about x, y, z (applied in that order
/// after scaling).
struct Augmentation {
  Vec3 scale{1, 1, 1};
  std::array<int, 3> quarter_turns{0, 0, 0};
};

/// Scale factors from Normal(1, 0.1) clamped to [0.7, 1.3]; quarter turns uniform in 0..3.
Augmentation draw_augmentation(std::uint64_t seed);
Mesh apply_augmentation(const Mesh& mesh, const Augmentation& aug);
Mesh augment(const Mesh& mesh, std::uint64_t seed);

/// "SDVF" binary: magic, faces (u64), channels (u32), then little-endian float32 rows.
void write_features(std::ostream& out, const FeatureTensor& features);
FeatureTensor read_features(std::istream& in);
void save_features(const FeatureTensor& features, const std::filesystem::path& path);
FeatureTensor load_features(const std::filesystem::path& path);

}  // namespace subdivnet
