#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "subdivnet/hierarchy.h"
#include "subdivnet/mesh.h"

namespace subdivnet {

enum class DecimationMethod { Maps, Liu };

DecimationMethod parse_method(const std::string& name);
std::string method_name(DecimationMethod method);

using Bary = std::array<double, 3>;

/// A location on a triangle mesh.
struct SurfacePoint {
  int face = -1;
  Bary bary{};
};

/// A piece of an original face lying inside a single decimated face.
/// Corner j sits at host_bary[j] in the host face and at orig_bary[j] in the
/// original face.
struct Fragment {
  int original_face = -1;
  std::array<Bary, 3> host_bary{};
  std::array<Bary, 3> orig_bary{};
};

/// Correspondence between original vertices and faces of a decimated mesh.
struct ParamMap {
  /// Per original vertex: host face on the decimated mesh and barycentrics.
  std::vector<SurfacePoint> vertices;
  /// Per decimated face: the original vertices it hosts.
  std::vector<std::vector<int>> hosted;
};

/// Planar image of a removed vertex's 1-ring, kept for auditing.
struct Flattening {
  int vertex = -1;
  std::vector<int> ring;
  std::vector<Vec2> ring_uv;
  double total_angle = 0;
  std::vector<std::array<int, 3>> triangles;
};

struct DecimationOptions {
  DecimationMethod method = DecimationMethod::Maps;
  std::uint64_t seed = 0;
  /// Minimum interior angle of new faces, radians.
  double min_angle = 0.0;
  /// Largest allowed ratio of singular values between a triangle and its planar
  /// image during a removal; 0 disables the check. Relaxed automatically when
  /// decimation stalls.
  double max_stretch = 0.0;
  /// Upper bound on the total fragment count, as a multiple of the original face count.
  int fragment_budget = 200;
  bool keep_flattenings = false;
  /// Tangential smoothing passes over the subdivided vertices after projection
  /// (remesh only).
  int relax_iterations = 10;
};

/// Mutable decimation of a closed manifold that keeps a piecewise-linear
/// parameterization of the original surface over the current faces.
///
/// Vertices keep their original indices. Faces live in slots; a removal reuses
/// slots of the removed star.
class DecimationState {
 public:
  /// Keeps a reference to `original`, which must outlive the state.
  explicit DecimationState(const Mesh& original, DecimationOptions options = {});
  DecimationState(Mesh&&, DecimationOptions = {}) = delete;

  const Mesh& original() const { return *original_; }
  const DecimationOptions& options() const { return options_; }

  int face_count() const { return alive_faces_; }
  int vertex_count() const { return alive_vertices_; }
  int slot_count() const { return static_cast<int>(faces_.size()); }
  bool face_alive(int slot) const { return face_alive_[slot]; }
  bool vertex_alive(int v) const { return vertex_alive_[v]; }
  const Face& slot_face(int slot) const { return faces_[slot]; }

  /// Counterclockwise 1-ring of an alive vertex, empty if its fan is not a disk.
  std::vector<int> one_ring(int v) const;
  /// Sum of incident face angles at v on the current mesh.
  double total_angle(int v) const;

  /// Removes v and re-triangulates its hole in the conformally flattened 1-ring.
  /// Returns false, leaving the state untouched, if the removal is not valid.
  bool remove_vertex(int v);
  /// Half-edge collapse of u into its ring neighbor w, as a fan around w.
  bool collapse_edge(int u, int w);

  double stretch_limit() const { return stretch_limit_; }
  void set_stretch_limit(double limit) { stretch_limit_ = limit; }

  const std::vector<Fragment>& fragments(int slot) const { return fragments_[slot]; }
  std::size_t fragment_total() const { return fragment_count_; }
  const SurfacePoint& vertex_image(int v) const { return images_[v]; }
  const std::vector<Flattening>& flattenings() const { return flattenings_; }

  /// Compacted current mesh; slot_to_face maps slots to face indices (-1 for dead).
  Mesh current_mesh(std::vector<int>* slot_to_face = nullptr, std::vector<int>* vertex_to_new = nullptr) const;

 private:
  struct Star {
    int vertex;
    std::vector<int> ring;
    std::vector<int> slots;  // slots[i] holds (vertex, ring[i], ring[i+1])
  };
  bool star(int v, Star& out) const;
  bool replace_star(const Star& s, const std::vector<Vec2>& uv, const std::vector<std::array<int, 3>>& tris);
  bool flatten(const Star& s, std::vector<Vec2>& uv, double& total) const;
  void set_face(int slot, const Face& f);
  void kill_face(int slot);

  const Mesh* original_;
  DecimationOptions options_;
  double degenerate_area_;
  std::vector<Face> faces_;
  std::vector<bool> face_alive_;
  std::vector<bool> vertex_alive_;
  std::vector<std::vector<int>> vertex_faces_;
  std::vector<std::vector<Fragment>> fragments_;
  /// Image of each original vertex; for alive vertices face is -1 (the vertex itself).
  std::vector<SurfacePoint> images_;
  std::vector<std::vector<int>> hosted_;
  std::vector<Flattening> flattenings_;
  std::size_t fragment_limit_;
  std::size_t fragment_count_ = 0;
  double stretch_limit_ = 0;
  int alive_faces_ = 0;
  int alive_vertices_ = 0;
};

/// Greedy maximal independent set over the vertex graph of `mesh`, visiting
/// low-curvature vertices first with seeded randomization. Vertices of valence
/// below 3 and protected vertices are excluded.
std::vector<int> max_independent_set(const Mesh& mesh, std::uint64_t seed,
                                     const std::set<int>& protected_vertices = {});

struct DecimationResult {
  Mesh base;
  ParamMap param;
  /// Fragments hosted by each base face, host barycentrics relative to it.
  std::vector<std::vector<Fragment>> fragments;
  /// Original vertex index of each base vertex.
  std::vector<int> base_to_original;
  bool reached_target = true;
  std::string message;
};

/// Decimates to a face count in [base_size, 2 * base_size) if possible. When the
/// target cannot be reached the smallest achieved mesh is returned with
/// reached_target = false.
DecimationResult decimate_to_base(const Mesh& mesh, int base_size, DecimationOptions options = {});

struct RemeshResult {
  MeshPyramid pyramid;
  /// Original vertices over base faces.
  ParamMap param;
  /// Per finest vertex: the original face and barycentrics it was evaluated at.
  std::vector<SurfacePoint> finest_sources;
  bool reached_target = true;
  std::string message;
};

/// Decimates, splits the base `depth` times without vertex update, and places each
/// new vertex at the image of its parameter-domain midpoint on the original surface.
RemeshResult remesh(const Mesh& mesh, int base_size, int depth, DecimationOptions options = {});

std::string param_map_json(const ParamMap& map);

/// Labels each target face with the label of the source face nearest to its centroid.
std::vector<int> transfer_labels(const Mesh& source, std::span<const int> source_labels,
                                 const Mesh& target);

}  // namespace subdivnet
