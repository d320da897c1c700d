#include "subdivnet/mesh.h"

#include <algorithm>
#include <limits>
#include <queue>
#include <string>
#include <tuple>

#include "subdivnet/error.h"

namespace subdivnet {

namespace {

struct HalfEdgeKey {
  int lo, hi, face, local;
  auto operator<=>(const HalfEdgeKey&) const = default;
};

std::vector<Face> build_adjacency(const std::vector<Face>& faces) {
  std::vector<HalfEdgeKey> keys;
  keys.reserve(faces.size() * 3);
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    for (int t = 0; t < 3; ++t) {
      const int a = faces[f][(t + 1) % 3];
      const int b = faces[f][(t + 2) % 3];
      keys.push_back({std::min(a, b), std::max(a, b), f, t});
    }
  }
  std::sort(keys.begin(), keys.end());

  std::vector<Face> adjacency(faces.size(), Face{kNoFace, kNoFace, kNoFace});
  std::size_t i = 0;
  while (i < keys.size()) {
    std::size_t j = i;
    while (j < keys.size() && keys[j].lo == keys[i].lo && keys[j].hi == keys[i].hi) ++j;
    if (j - i == 2) {
      adjacency[keys[i].face][keys[i].local] = keys[i + 1].face;
      adjacency[keys[i + 1].face][keys[i + 1].local] = keys[i].face;
    }
    i = j;
  }
  return adjacency;
}

}  // namespace

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int n = static_cast<int>(vertices_.size());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& t = faces_[f];
    for (int v : t) {
      if (v < 0 || v >= n) {
        throw ShapeError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                         " out of range [0, " + std::to_string(n) + ")");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw ShapeError("face " + std::to_string(f) + " repeats a vertex");
    }
  }
  adjacency_ = build_adjacency(faces_);
}

Vec3 Mesh::centroid(int f) const {
  const Face& t = faces_[f];
  return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
}

Vec3 Mesh::area_normal(int f) const {
  const Face& t = faces_[f];
  return cross(vertices_[t[1]] - vertices_[t[0]], vertices_[t[2]] - vertices_[t[0]]);
}

int Mesh::local_index(int f, int v) const {
  const Face& t = faces_[f];
  for (int i = 0; i < 3; ++i) {
    if (t[i] == v) return i;
  }
  return -1;
}

Mesh Mesh::with_positions(std::vector<Vec3> positions) const {
  if (positions.size() != vertices_.size()) {
    throw ShapeError("with_positions: vertex count mismatch");
  }
  Mesh out;
  out.vertices_ = std::move(positions);
  out.faces_ = faces_;
  out.adjacency_ = adjacency_;
  return out;
}

std::vector<Edge> unique_edges(const Mesh& mesh) {
  std::vector<Edge> edges;
  edges.reserve(mesh.faces().size() * 3);
  for (const Face& t : mesh.faces()) {
    for (int i = 0; i < 3; ++i) {
      const int a = t[i];
      const int b = t[(i + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<int> vertex_valences(const Mesh& mesh) {
  std::vector<int> valence(mesh.vertex_count(), 0);
  for (const Face& t : mesh.faces()) {
    for (int v : t) ++valence[v];
  }
  return valence;
}

std::vector<std::vector<int>> vertex_face_lists(const Mesh& mesh) {
  std::vector<std::vector<int>> lists(mesh.vertex_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int v : mesh.face(f)) lists[v].push_back(f);
  }
  return lists;
}

std::vector<int> vertex_ring(const Mesh& mesh, std::span<const std::vector<int>> vertex_faces,
                             int v) {
  const auto& incident = vertex_faces[v];
  std::vector<int> ring;
  if (incident.empty()) return ring;
  // Each incident face (v, a, b) contributes the directed link edge a -> b.
  std::vector<std::pair<int, int>> link;
  link.reserve(incident.size());
  for (int f : incident) {
    const int i = mesh.local_index(f, v);
    const Face& t = mesh.face(f);
    link.emplace_back(t[(i + 1) % 3], t[(i + 2) % 3]);
  }
  int current = link.front().first;
  ring.push_back(current);
  for (std::size_t step = 1; step < link.size(); ++step) {
    auto it = std::find_if(link.begin(), link.end(),
                           [&](const auto& e) { return e.first == current; });
    if (it == link.end()) return {};
    current = it->second;
    if (current == ring.front()) return {};
    ring.push_back(current);
  }
  return ring;
}

MeshStats validate_closed_manifold(const Mesh& mesh) {
  MeshStats stats;
  stats.vertex_count = mesh.vertex_count();
  stats.face_count = mesh.face_count();

  // Directed edges: every undirected edge must appear exactly once in each direction.
  std::vector<std::tuple<int, int, int>> directed;  // (lo, hi, +1 if lo->hi else -1)
  directed.reserve(mesh.faces().size() * 3);
  for (const Face& t : mesh.faces()) {
    for (int i = 0; i < 3; ++i) {
      const int a = t[i];
      const int b = t[(i + 1) % 3];
      directed.emplace_back(std::min(a, b), std::max(a, b), a < b ? 1 : -1);
    }
  }
  std::sort(directed.begin(), directed.end());

  bool closed = mesh.face_count() > 0;
  std::int64_t edge_count = 0;
  std::size_t i = 0;
  while (i < directed.size()) {
    std::size_t j = i;
    while (j < directed.size() && std::get<0>(directed[j]) == std::get<0>(directed[i]) &&
           std::get<1>(directed[j]) == std::get<1>(directed[i])) {
      ++j;
    }
    ++edge_count;
    // Two faces with opposite directions: sorted order puts -1 before +1.
    if (j - i != 2 || std::get<2>(directed[i]) != -1 || std::get<2>(directed[i + 1]) != 1) {
      closed = false;
    }
    i = j;
  }
  stats.edge_count = edge_count;
  stats.euler_characteristic = stats.vertex_count - stats.edge_count + stats.face_count;

  // Every referenced vertex must have a single-cycle face fan; unreferenced vertices are
  // isolated points and also break the closed-manifold property.
  const auto fans = vertex_face_lists(mesh);
  for (int v = 0; v < mesh.vertex_count() && closed; ++v) {
    if (fans[v].empty() || vertex_ring(mesh, fans, v).size() != fans[v].size()) closed = false;
  }
  stats.is_closed_manifold = closed;

  if (mesh.face_count() > 0) {
    const auto dist = face_distances_from(mesh, 0);
    stats.is_connected = std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
  }
  if (closed) stats.genus = (2 - stats.euler_characteristic) / 2;
  return stats;
}

std::pair<Vec3, Vec3> bounding_box(const Mesh& mesh) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vec3 lo{inf, inf, inf};
  Vec3 hi{-inf, -inf, -inf};
  for (const Vec3& p : mesh.vertices()) {
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  return {lo, hi};
}

double bounding_box_diagonal(const Mesh& mesh) {
  if (mesh.vertex_count() == 0) return 0.0;
  const auto [lo, hi] = bounding_box(mesh);
  return norm(hi - lo);
}

std::vector<bool> degenerate_faces(const Mesh& mesh, double rel_eps) {
  const double diag = bounding_box_diagonal(mesh);
  const double threshold = rel_eps * diag * diag;
  std::vector<bool> flags(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) flags[f] = mesh.area(f) < threshold;
  return flags;
}

namespace {

void check_face(const Mesh& mesh, int f) {
  if (f < 0 || f >= mesh.face_count()) {
    throw ShapeError("face index " + std::to_string(f) + " out of range [0, " +
                     std::to_string(mesh.face_count()) + ")");
  }
}

}  // namespace

std::vector<int> face_distances_from(const Mesh& mesh, int source) {
  check_face(mesh, source);
  std::vector<int> dist(mesh.face_count(), -1);
  std::queue<int> queue;
  dist[source] = 0;
  queue.push(source);
  while (!queue.empty()) {
    const int f = queue.front();
    queue.pop();
    for (int g : mesh.neighbors(f)) {
      if (g != kNoFace && dist[g] < 0) {
        dist[g] = dist[f] + 1;
        queue.push(g);
      }
    }
  }
  return dist;
}

int face_distance(const Mesh& mesh, int f, int g) {
  check_face(mesh, g);
  if (f == g) {
    check_face(mesh, f);
    return 0;
  }
  // Early-exit BFS; the full distance field is not needed.
  std::vector<int> dist(mesh.face_count(), -1);
  std::queue<int> queue;
  check_face(mesh, f);
  dist[f] = 0;
  queue.push(f);
  while (!queue.empty()) {
    const int h = queue.front();
    queue.pop();
    for (int n : mesh.neighbors(h)) {
      if (n == kNoFace || dist[n] >= 0) continue;
      dist[n] = dist[h] + 1;
      if (n == g) return dist[n];
      queue.push(n);
    }
  }
  return -1;
}

std::vector<int> k_ring(const Mesh& mesh, int f, int k) {
  if (k < 0) throw ShapeError("k_ring: k must be nonnegative");
  check_face(mesh, f);
  if (k == 0) return {f};
  std::vector<int> dist(mesh.face_count(), -1);
  std::vector<int> frontier{f};
  dist[f] = 0;
  for (int level = 1; level <= k && !frontier.empty(); ++level) {
    std::vector<int> next;
    for (int h : frontier) {
      for (int n : mesh.neighbors(h)) {
        if (n != kNoFace && dist[n] < 0) {
          dist[n] = level;
          next.push_back(n);
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(frontier.begin(), frontier.end());
  return frontier;
}

}  // namespace subdivnet
