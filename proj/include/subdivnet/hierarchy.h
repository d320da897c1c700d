#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "subdivnet/feature_tensor.h"
#include "subdivnet/mesh.h"

namespace subdivnet {

/// 4-to-1 face correspondence between a fine mesh and its parent level.
///
/// children[p] is ordered (corner0, corner1, corner2, central) where corner j is
/// the child containing parent vertex j.
struct FaceMap {
  std::vector<int> parent_of;
  std::vector<int> central_child;
  std::vector<std::array<int, 4>> children;

  int fine_count() const { return static_cast<int>(parent_of.size()); }
  int coarse_count() const { return static_cast<int>(central_child.size()); }
};

/// Subdivision schemes for strided pooling. Only the Loop 1-to-4 split exists.
enum class SplitScheme { Loop1To4 };

struct SplitResult {
  Mesh fine;
  FaceMap map;
};

/// 1-to-4 split without vertex update. Coarse vertices keep their indices; the
/// midpoint of the e-th edge of unique_edges(coarse) becomes vertex V + e.
/// Children of parent p are faces 4p .. 4p+3 in the FaceMap child order.
/// Throws TopologyError unless the input is a closed 2-manifold.
SplitResult loop_split(const Mesh& coarse, SplitScheme scheme = SplitScheme::Loop1To4);

/// Loop vertex weight for an even vertex of valence n.
double loop_beta(int n);

/// Loop smoothing of the positions of `fine_topology`, which must be loop_split(coarse).
/// Throws TopologyError on a topology mismatch.
Mesh loop_smooth(const Mesh& coarse, const Mesh& fine_topology);

struct Coarsening {
  Mesh coarse;
  FaceMap map;
  /// Fine vertex index of each coarse vertex.
  std::vector<int> coarse_to_fine;
};

/// Recovers the coarse mesh of which `mesh` is a Loop split, if any.
///
/// Candidate 4-face groups are grown from a seed central face; the result is then
/// checked globally by re-splitting the reconstructed coarse mesh and comparing
/// against the input. Coarse vertices are numbered by ascending fine index and
/// coarse faces by the smallest index among their children.
std::optional<Coarsening> detect_subdivision_connectivity(const Mesh& mesh);

/// Meshes M_0 (base) .. M_L (finest) with face maps between consecutive levels.
struct MeshPyramid {
  std::vector<Mesh> levels;
  /// maps[i - 1] relates level i to level i - 1.
  std::vector<FaceMap> maps;

  int depth() const { return static_cast<int>(levels.size()) - 1; }
  const Mesh& level(int i) const { return levels.at(i); }
  const Mesh& finest() const { return levels.back(); }
  const Mesh& base() const { return levels.front(); }
  int base_size() const { return levels.front().face_count(); }
  /// Face map from level i (i >= 1) to level i - 1.
  const FaceMap& face_map(int i) const { return maps.at(i - 1); }
};

/// Detects subdivision connectivity `depth` times. Vertices are renumbered so that
/// every level's vertices form a prefix of the next level's vertex array; the
/// finest level keeps its face order. Throws TopologyError naming the failing step.
MeshPyramid build_pyramid(const Mesh& mesh, int depth);

/// Checks face-count ratio, map inversion, central-child adjacency and vertex
/// inclusion. Returns an empty string when valid, otherwise the first violation.
std::string check_pyramid(const MeshPyramid& pyramid);

enum class PoolMode { Max, Mean };

FeatureTensor pool(const FeatureTensor& fine, const FaceMap& map, PoolMode mode);
FeatureTensor upsample_nearest(const FeatureTensor& coarse, const FaceMap& map);

/// Interpolation weights for bilinear upsampling: each fine face reads up to
/// three coarse rows. Central children copy their parent; a corner child takes
/// 1/2 of its parent and 1/4 of the parents of its two non-sibling neighbors.
struct BilinearStencil {
  std::vector<std::array<int, 3>> source;
  std::vector<std::array<double, 3>> weight;
};
BilinearStencil bilinear_stencil(const FaceMap& map, const Mesh& fine);

FeatureTensor upsample_bilinear(const FeatureTensor& coarse, const FaceMap& map, const Mesh& fine);
FeatureTensor upsample_bilinear(const FeatureTensor& coarse, const BilinearStencil& stencil);

}  // namespace subdivnet
