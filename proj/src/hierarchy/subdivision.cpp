#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "subdivnet/error.h"
#include "subdivnet/hierarchy.h"

namespace subdivnet {

namespace {

int edge_index(const std::vector<Edge>& edges, int a, int b) {
  const Edge key{std::min(a, b), std::max(a, b)};
  const auto it = std::lower_bound(edges.begin(), edges.end(), key);
  if (it == edges.end() || *it != key) return -1;
  return static_cast<int>(it - edges.begin());
}

}  // namespace

SplitResult loop_split(const Mesh& coarse, SplitScheme scheme) {
  if (scheme != SplitScheme::Loop1To4) throw Error("only the Loop 1-to-4 scheme is implemented");
  if (!validate_closed_manifold(coarse).is_closed_manifold) {
    throw TopologyError("loop_split requires a closed 2-manifold");
  }
  const auto edges = unique_edges(coarse);
  const int nv = coarse.vertex_count();

  std::vector<Vec3> positions = coarse.vertices();
  positions.reserve(nv + edges.size());
  for (const auto& [a, b] : edges) positions.push_back((coarse.position(a) + coarse.position(b)) * 0.5);

  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(coarse.face_count()) * 4);
  FaceMap map;
  map.parent_of.resize(static_cast<std::size_t>(coarse.face_count()) * 4);
  map.central_child.resize(coarse.face_count());
  map.children.resize(coarse.face_count());
  for (int p = 0; p < coarse.face_count(); ++p) {
    const auto [a, b, c] = coarse.face(p);
    const int mab = nv + edge_index(edges, a, b);
    const int mbc = nv + edge_index(edges, b, c);
    const int mca = nv + edge_index(edges, c, a);
    faces.push_back({a, mab, mca});
    faces.push_back({mab, b, mbc});
    faces.push_back({mca, mbc, c});
    faces.push_back({mab, mbc, mca});
    for (int j = 0; j < 4; ++j) {
      map.parent_of[4 * p + j] = p;
      map.children[p][j] = 4 * p + j;
    }
    map.central_child[p] = 4 * p + 3;
  }
  return {Mesh(std::move(positions), std::move(faces)), std::move(map)};
}

double loop_beta(int n) {
  const double c = 3.0 / 8.0 + 0.25 * std::cos(2.0 * std::numbers::pi / n);
  return (5.0 / 8.0 - c * c) / n;
}

Mesh loop_smooth(const Mesh& coarse, const Mesh& fine_topology) {
  const auto edges = unique_edges(coarse);
  const int nv = coarse.vertex_count();
  if (fine_topology.vertex_count() != nv + static_cast<int>(edges.size()) ||
      fine_topology.face_count() != 4 * coarse.face_count()) {
    throw TopologyError("loop_smooth: fine mesh is not a 1-to-4 split of the coarse mesh");
  }

  // Each odd vertex is adjacent to exactly two even vertices: its edge endpoints.
  std::vector<std::vector<int>> even_neighbors(fine_topology.vertex_count());
  for (const Face& t : fine_topology.faces()) {
    for (int i = 0; i < 3; ++i) {
      const int a = t[i];
      const int b = t[(i + 1) % 3];
      if (a >= nv && b < nv) even_neighbors[a].push_back(b);
      if (b >= nv && a < nv) even_neighbors[b].push_back(a);
    }
  }

  // Opposite vertices of each coarse edge.
  std::vector<std::array<int, 2>> opposite(edges.size(), {-1, -1});
  for (const Face& t : coarse.faces()) {
    for (int i = 0; i < 3; ++i) {
      const int e = edge_index(edges, t[i], t[(i + 1) % 3]);
      auto& slot = opposite[e];
      (slot[0] < 0 ? slot[0] : slot[1]) = t[(i + 2) % 3];
    }
  }

  std::vector<Vec3> positions(fine_topology.vertex_count());
  std::vector<char> used(edges.size(), 0);
  for (int w = nv; w < fine_topology.vertex_count(); ++w) {
    auto& ends = even_neighbors[w];
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
    if (ends.size() != 2) throw TopologyError("loop_smooth: odd vertex without a coarse edge");
    const int e = edge_index(edges, ends[0], ends[1]);
    if (e < 0 || used[e] || opposite[e][1] < 0) {
      throw TopologyError("loop_smooth: odd vertex does not match a coarse edge");
    }
    used[e] = 1;
    positions[w] = (coarse.position(ends[0]) + coarse.position(ends[1])) * (3.0 / 8.0) +
                   (coarse.position(opposite[e][0]) + coarse.position(opposite[e][1])) * (1.0 / 8.0);
  }

  std::vector<Vec3> ring_sum(nv);
  std::vector<int> valence(nv, 0);
  for (const auto& [a, b] : edges) {
    ring_sum[a] += coarse.position(b);
    ring_sum[b] += coarse.position(a);
    ++valence[a];
    ++valence[b];
  }
  for (int v = 0; v < nv; ++v) {
    const int n = valence[v];
    const double beta = loop_beta(n);
    positions[v] = coarse.position(v) * (1.0 - n * beta) + ring_sum[v] * beta;
  }
  return fine_topology.with_positions(std::move(positions));
}

}  // namespace subdivnet
