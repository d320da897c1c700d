#include <algorithm>
#include <numeric>
#include <queue>

#include "subdivnet/hierarchy.h"

namespace subdivnet {

namespace {

enum VertexKind : signed char { kUnknown = 0, kEven = 1, kOdd = 2 };

struct Group {
  int central = -1;
  std::array<int, 3> corner{};  // corner[t] lies across the central edge opposite central vertex t
  std::array<int, 3> even{};    // even vertex of corner[t]
};

/// Grows a consistent 4-to-1 grouping outward from a hypothesized central face.
class GroupGrower {
 public:
  explicit GroupGrower(const Mesh& mesh)
      : mesh_(mesh),
        group_of_(mesh.face_count(), -1),
        kind_(mesh.vertex_count(), kUnknown) {}

  struct Snapshot {
    std::size_t groups;
    std::vector<int> group_of;
    std::vector<signed char> kind;
  };
  Snapshot snapshot() const { return {groups_.size(), group_of_, kind_}; }
  void restore(const Snapshot& s) {
    groups_.resize(s.groups);
    group_of_ = s.group_of;
    kind_ = s.kind;
  }

  /// Attempts to grow from `seed_central`; on failure all state is rolled back.
  bool grow(int seed_central) {
    auto saved = snapshot();
    if (try_grow(seed_central)) return true;
    restore(saved);
    return false;
  }

  /// Sum over groups created since `since` of the spread of their face indices.
  long spread_since(std::size_t since) const {
    long total = 0;
    for (std::size_t i = since; i < groups_.size(); ++i) {
      const Group& g = groups_[i];
      const int lo = std::min({g.central, g.corner[0], g.corner[1], g.corner[2]});
      const int hi = std::max({g.central, g.corner[0], g.corner[1], g.corner[2]});
      total += hi - lo;
    }
    return total;
  }

  bool assigned(int f) const { return group_of_[f] >= 0; }
  const std::vector<Group>& groups() const { return groups_; }
  const std::vector<int>& group_of() const { return group_of_; }

 private:
  bool mark(int v, VertexKind k) {
    if (kind_[v] == kUnknown) kind_[v] = k;
    return kind_[v] == k;
  }

  /// Creates the group centered at c, or checks an existing one. Returns the group
  /// index or -1 on conflict.
  int claim(int c, std::queue<int>& pending) {
    if (group_of_[c] >= 0) return groups_[group_of_[c]].central == c ? group_of_[c] : -1;
    const Face& cv = mesh_.face(c);
    Group g;
    g.central = c;
    for (int t = 0; t < 3; ++t) {
      const int k = mesh_.neighbors(c)[t];
      if (k == kNoFace || group_of_[k] >= 0) return -1;
      const int a = cv[(t + 1) % 3];
      const int b = cv[(t + 2) % 3];
      int e = -1;
      for (int v : mesh_.face(k)) {
        if (v != a && v != b) e = v;
      }
      if (e < 0 || e == cv[t]) return -1;
      g.corner[t] = k;
      g.even[t] = e;
    }
    if (g.corner[0] == g.corner[1] || g.corner[1] == g.corner[2] || g.corner[0] == g.corner[2]) {
      return -1;
    }
    for (int v : cv) {
      if (!mark(v, kOdd)) return -1;
    }
    for (int e : g.even) {
      if (!mark(e, kEven)) return -1;
    }
    const int id = static_cast<int>(groups_.size());
    groups_.push_back(g);
    group_of_[c] = id;
    for (int k : g.corner) group_of_[k] = id;
    pending.push(id);
    return id;
  }

  bool try_grow(int seed_central) {
    std::queue<int> pending;
    if (claim(seed_central, pending) < 0) return false;
    while (!pending.empty()) {
      const Group g = groups_[pending.front()];
      pending.pop();
      for (int t = 0; t < 3; ++t) {
        const int k = g.corner[t];
        const int e = g.even[t];
        const int le = mesh_.local_index(k, e);
        // The two edges of k incident to its even vertex lead into neighboring groups.
        for (int s : {(le + 1) % 3, (le + 2) % 3}) {
          const int n = mesh_.neighbors(k)[s];
          if (n == kNoFace) return false;
          const int ln = mesh_.local_index(n, e);
          if (ln < 0) return false;
          const int h = mesh_.neighbors(n)[ln];
          if (h == kNoFace) return false;
          const int id = claim(h, pending);
          if (id < 0) return false;
          const Group& other = groups_[id];
          bool ok = false;
          for (int u = 0; u < 3; ++u) ok = ok || (other.corner[u] == n && other.even[u] == e);
          if (!ok) return false;
        }
      }
    }
    return true;
  }

  const Mesh& mesh_;
  std::vector<Group> groups_;
  std::vector<int> group_of_;
  std::vector<signed char> kind_;
};

bool same_cycle(const Face& a, const Face& b) {
  for (int r = 0; r < 3; ++r) {
    if (a[0] == b[r] && a[1] == b[(r + 1) % 3] && a[2] == b[(r + 2) % 3]) return true;
  }
  return false;
}

}  // namespace

std::optional<Coarsening> detect_subdivision_connectivity(const Mesh& mesh) {
  const int nf = mesh.face_count();
  if (nf == 0 || nf % 4 != 0) return std::nullopt;
  if (!validate_closed_manifold(mesh).is_closed_manifold) return std::nullopt;

  const auto valence = vertex_valences(mesh);
  GroupGrower grower(mesh);

  for (int start = 0; start < nf; ++start) {
    if (grower.assigned(start)) continue;
    // Collect the component to find a seed touching an irregular vertex: such a
    // vertex can only be even, which pins down the seed's central face.
    std::vector<int> component{start};
    std::vector<char> seen(nf, 0);
    seen[start] = 1;
    for (std::size_t i = 0; i < component.size(); ++i) {
      for (int n : mesh.neighbors(component[i])) {
        if (!seen[n]) {
          seen[n] = 1;
          component.push_back(n);
        }
      }
    }
    int pinned = -1;
    for (int f : component) {
      for (int t = 0; t < 3 && pinned < 0; ++t) {
        if (valence[mesh.face(f)[t]] != 6) pinned = mesh.neighbors(f)[t];
      }
      if (pinned >= 0) break;
    }
    if (pinned >= 0) {
      if (!grower.grow(pinned)) return std::nullopt;
      continue;
    }
    // All-regular component (e.g. a torus): several groupings may be valid. Prefer
    // the one whose groups are most compact in face index order, which recovers
    // the grouping of loop_split output exactly.
    const std::array<int, 4> hypotheses{start, mesh.neighbors(start)[0],
                                        mesh.neighbors(start)[1], mesh.neighbors(start)[2]};
    int best = -1;
    long best_spread = 0;
    for (int c : hypotheses) {
      const auto saved = grower.snapshot();
      if (grower.grow(c)) {
        const long spread = grower.spread_since(saved.groups);
        if (best < 0 || spread < best_spread) {
          best = c;
          best_spread = spread;
        }
        grower.restore(saved);
      }
    }
    if (best < 0 || !grower.grow(best)) return std::nullopt;
  }

  // Reconstruct the coarse mesh from the groups.
  auto groups = grower.groups();
  for (auto& g : groups) {
    // Coarse face (even[0], even[1], even[2]) keeps the fine orientation; rotate it so
    // the corner with the smallest face index comes first.
    int r = 0;
    for (int t = 1; t < 3; ++t) {
      if (g.corner[t] < g.corner[r]) r = t;
    }
    std::rotate(g.corner.begin(), g.corner.begin() + r, g.corner.end());
    std::rotate(g.even.begin(), g.even.begin() + r, g.even.end());
  }
  std::vector<int> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  auto min_face = [&](const Group& g) {
    return std::min({g.central, g.corner[0], g.corner[1], g.corner[2]});
  };
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return min_face(groups[a]) < min_face(groups[b]); });

  std::vector<int> coarse_to_fine;
  for (const auto& g : groups) {
    for (int e : g.even) coarse_to_fine.push_back(e);
  }
  std::sort(coarse_to_fine.begin(), coarse_to_fine.end());
  coarse_to_fine.erase(std::unique(coarse_to_fine.begin(), coarse_to_fine.end()),
                       coarse_to_fine.end());
  std::vector<int> fine_to_coarse(mesh.vertex_count(), -1);
  for (int i = 0; i < static_cast<int>(coarse_to_fine.size()); ++i) {
    fine_to_coarse[coarse_to_fine[i]] = i;
  }

  std::vector<Vec3> coarse_positions;
  coarse_positions.reserve(coarse_to_fine.size());
  for (int v : coarse_to_fine) coarse_positions.push_back(mesh.position(v));
  std::vector<Face> coarse_faces;
  coarse_faces.reserve(groups.size());
  FaceMap map;
  map.parent_of.assign(nf, -1);
  for (int p = 0; p < static_cast<int>(order.size()); ++p) {
    const Group& g = groups[order[p]];
    coarse_faces.push_back(
        {fine_to_coarse[g.even[0]], fine_to_coarse[g.even[1]], fine_to_coarse[g.even[2]]});
    map.central_child.push_back(g.central);
    map.children.push_back({g.corner[0], g.corner[1], g.corner[2], g.central});
    for (int f : map.children.back()) map.parent_of[f] = p;
  }

  Mesh coarse;
  try {
    coarse = Mesh(std::move(coarse_positions), std::move(coarse_faces));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (!validate_closed_manifold(coarse).is_closed_manifold) return std::nullopt;
  const auto edges = unique_edges(coarse);
  if (mesh.vertex_count() != coarse.vertex_count() + static_cast<int>(edges.size())) {
    return std::nullopt;
  }

  // Re-split the coarse mesh and compare against the input. Odd vertices are matched
  // to coarse edges through the corners that share them.
  const int nv = coarse.vertex_count();
  std::vector<int> split_to_fine(nv + edges.size(), -1);
  for (int v = 0; v < nv; ++v) split_to_fine[v] = coarse_to_fine[v];
  auto split = loop_split(coarse);
  for (int p = 0; p < coarse.face_count(); ++p) {
    const auto& ch = map.children[p];
    for (int j = 0; j < 4; ++j) {
      const Face& expected = split.fine.face(4 * p + j);
      const Face& actual = mesh.face(ch[j]);
      // Corner j must contain parent vertex j.
      if (j < 3 && mesh.local_index(ch[j], coarse_to_fine[coarse.face(p)[j]]) < 0) {
        return std::nullopt;
      }
      // Align the rotation using the even vertex (corners) or position (central).
      int r = 0;
      if (j < 3) {
        const int le = mesh.local_index(ch[j], coarse_to_fine[coarse.face(p)[j]]);
        r = (le - j + 3) % 3;  // expected[j] is the even vertex
      } else {
        // Central child (m_ab, m_bc, m_ca): m_ab is shared with corner 0.
        const Face& c0 = mesh.face(ch[0]);
        r = -1;
        for (int i = 0; i < 3; ++i) {
          const int v = actual[i];
          if ((v == c0[0] || v == c0[1] || v == c0[2]) &&
              mesh.local_index(ch[1], v) >= 0) {
            r = i;
          }
        }
        if (r < 0) return std::nullopt;
      }
      for (int i = 0; i < 3; ++i) {
        const int sv = expected[i];
        const int fv = actual[(i + r) % 3];
        if (split_to_fine[sv] < 0) split_to_fine[sv] = fv;
        if (split_to_fine[sv] != fv) return std::nullopt;
      }
    }
  }
  std::vector<char> hit(mesh.vertex_count(), 0);
  for (int v : split_to_fine) {
    if (v < 0 || hit[v]) return std::nullopt;
    hit[v] = 1;
  }
  for (int p = 0; p < coarse.face_count(); ++p) {
    for (int j = 0; j < 4; ++j) {
      const Face& e = split.fine.face(4 * p + j);
      const Face mapped{split_to_fine[e[0]], split_to_fine[e[1]], split_to_fine[e[2]]};
      if (!same_cycle(mapped, mesh.face(map.children[p][j]))) return std::nullopt;
    }
  }

  return Coarsening{std::move(coarse), std::move(map), std::move(coarse_to_fine)};
}

}  // namespace subdivnet
