#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "subdivnet/vec.h"

namespace subdivnet {

using Face = std::array<int, 3>;
using Edge = std::pair<int, int>;

/// Marks a missing neighbor in face adjacency (boundary or non-manifold edge).
inline constexpr int kNoFace = -1;

/// Indexed triangle mesh with face adjacency.
///
/// adjacency()[f][t] is the face across the edge opposite local vertex t of f,
/// i.e. across (faces()[f][t+1], faces()[f][t+2]). Edges with other than two
/// incident faces get kNoFace on every side. The mesh is immutable after
/// construction, so concurrent queries are safe.
class Mesh {
 public:
  Mesh() = default;

  /// Throws ShapeError if a face references a vertex out of range or repeats a vertex.
  Mesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Face>& adjacency() const { return adjacency_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int face_count() const { return static_cast<int>(faces_.size()); }

  const Face& face(int f) const { return faces_[f]; }
  const Face& neighbors(int f) const { return adjacency_[f]; }
  const Vec3& position(int v) const { return vertices_[v]; }

  Vec3 centroid(int f) const;
  /// Unnormalized normal; its length is twice the face area.
  Vec3 area_normal(int f) const;
  double area(int f) const { return 0.5 * norm(area_normal(f)); }

  /// Local index (0..2) of vertex v in face f, or -1.
  int local_index(int f, int v) const;

  /// Same connectivity, new positions. Reuses the adjacency without rebuilding it.
  Mesh with_positions(std::vector<Vec3> positions) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Face> adjacency_;
};

struct MeshStats {
  std::int64_t vertex_count = 0;
  std::int64_t edge_count = 0;
  std::int64_t face_count = 0;
  std::int64_t euler_characteristic = 0;
  /// Only meaningful when is_closed_manifold; (2 - chi) / 2 for orientable surfaces.
  std::int64_t genus = 0;
  bool is_closed_manifold = false;
  bool is_connected = false;
};

/// Sorted list of undirected edges (a < b).
std::vector<Edge> unique_edges(const Mesh& mesh);

/// Number of incident faces per vertex (equals valence on a closed manifold).
std::vector<int> vertex_valences(const Mesh& mesh);

/// Edge manifoldness, single-fan vertex links and consistent orientation.
MeshStats validate_closed_manifold(const Mesh& mesh);

/// Faces with area below rel_eps * (bounding box diagonal)^2.
std::vector<bool> degenerate_faces(const Mesh& mesh, double rel_eps = 1e-12);

std::pair<Vec3, Vec3> bounding_box(const Mesh& mesh);
double bounding_box_diagonal(const Mesh& mesh);

/// BFS face distances from `source`; unreachable faces get -1.
std::vector<int> face_distances_from(const Mesh& mesh, int source);

/// Shortest face-adjacency path length between f and g, or -1 if disconnected.
int face_distance(const Mesh& mesh, int f, int g);

/// Faces at distance exactly k from f, in ascending index order.
std::vector<int> k_ring(const Mesh& mesh, int f, int k);

/// Vertex one-ring in counterclockwise order around v, assuming a closed manifold.
std::vector<int> vertex_ring(const Mesh& mesh, std::span<const std::vector<int>> vertex_faces,
                             int v);

/// Incident faces for every vertex.
std::vector<std::vector<int>> vertex_face_lists(const Mesh& mesh);

}  // namespace subdivnet
