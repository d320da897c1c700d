#include <algorithm>
#include <limits>
#include <string>

#include "subdivnet/error.h"
#include "subdivnet/hierarchy.h"

namespace subdivnet {

MeshPyramid build_pyramid(const Mesh& mesh, int depth) {
  if (depth < 0) throw Error("build_pyramid: depth must be nonnegative");
  // Coarsen repeatedly, remembering which finest-level vertex each coarse vertex is.
  std::vector<Mesh> levels{mesh};
  std::vector<FaceMap> maps;
  std::vector<std::vector<int>> finest_id{std::vector<int>(mesh.vertex_count())};
  for (int v = 0; v < mesh.vertex_count(); ++v) finest_id[0][v] = v;
  for (int step = 1; step <= depth; ++step) {
    auto coarsening = detect_subdivision_connectivity(levels.back());
    if (!coarsening) {
      throw TopologyError("no Loop subdivision connectivity at coarsening step " +
                          std::to_string(step) + " (level " + std::to_string(depth - step + 1) +
                          " of " + std::to_string(depth) + ")");
    }
    std::vector<int> ids(coarsening->coarse_to_fine.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ids[i] = finest_id.back()[coarsening->coarse_to_fine[i]];
    }
    finest_id.push_back(std::move(ids));
    maps.push_back(std::move(coarsening->map));
    levels.push_back(std::move(coarsening->coarse));
  }
  std::reverse(levels.begin(), levels.end());
  std::reverse(maps.begin(), maps.end());
  std::reverse(finest_id.begin(), finest_id.end());

  // Global vertex order: base vertices first, then each level's new vertices.
  std::vector<int> rank(mesh.vertex_count(), -1);
  int next = 0;
  for (const auto& ids : finest_id) {
    for (int v : ids) {
      if (rank[v] < 0) rank[v] = next++;
    }
  }
  std::vector<Vec3> ordered(mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) ordered[rank[v]] = mesh.position(v);

  MeshPyramid pyramid;
  for (int i = 0; i <= depth; ++i) {
    const Mesh& level = levels[i];
    std::vector<Face> faces = level.faces();
    for (Face& t : faces) {
      for (int& v : t) v = rank[finest_id[i][v]];
    }
    const int nv = level.vertex_count();
    for (const Face& t : faces) {
      for (int v : t) {
        if (v >= nv) throw TopologyError("build_pyramid: vertex inclusion violated");
      }
    }
    pyramid.levels.emplace_back(std::vector<Vec3>(ordered.begin(), ordered.begin() + nv),
                                std::move(faces));
  }
  pyramid.maps = std::move(maps);
  if (const auto problem = check_pyramid(pyramid); !problem.empty()) {
    throw TopologyError("build_pyramid: " + problem);
  }
  return pyramid;
}

std::string check_pyramid(const MeshPyramid& pyramid) {
  if (pyramid.levels.empty()) return "no levels";
  if (pyramid.maps.size() + 1 != pyramid.levels.size()) return "face map count mismatch";
  const auto chi = validate_closed_manifold(pyramid.base()).euler_characteristic;
  for (int i = 1; i <= pyramid.depth(); ++i) {
    const Mesh& fine = pyramid.level(i);
    const Mesh& coarse = pyramid.level(i - 1);
    const FaceMap& map = pyramid.face_map(i);
    const std::string where = "level " + std::to_string(i) + ": ";
    if (fine.face_count() != 4 * coarse.face_count()) return where + "face count ratio is not 4";
    if (map.fine_count() != fine.face_count() || map.coarse_count() != coarse.face_count() ||
        static_cast<int>(map.children.size()) != coarse.face_count()) {
      return where + "face map size mismatch";
    }
    if (validate_closed_manifold(fine).euler_characteristic != chi) {
      return where + "Euler characteristic changed";
    }
    if (fine.vertex_count() < coarse.vertex_count()) return where + "vertex inclusion violated";
    for (int v = 0; v < coarse.vertex_count(); ++v) {
      if (!(fine.position(v) == coarse.position(v))) return where + "vertex inclusion violated";
    }
    for (int p = 0; p < coarse.face_count(); ++p) {
      const auto& ch = map.children[p];
      if (ch[3] != map.central_child[p]) return where + "central child mismatch";
      for (int j = 0; j < 4; ++j) {
        if (ch[j] < 0 || ch[j] >= fine.face_count() || map.parent_of[ch[j]] != p) {
          return where + "maps are not mutually inverse";
        }
      }
      for (int j = 0; j < 3; ++j) {
        if (fine.local_index(ch[j], coarse.face(p)[j]) < 0) return where + "corner order violated";
      }
      auto n = fine.neighbors(ch[3]);
      std::array<int, 3> sib{ch[0], ch[1], ch[2]};
      std::sort(n.begin(), n.end());
      std::sort(sib.begin(), sib.end());
      if (n != sib) return where + "central child is not surrounded by its siblings";
    }
  }
  return {};
}

FeatureTensor pool(const FeatureTensor& fine, const FaceMap& map, PoolMode mode) {
  if (fine.rows() != map.fine_count()) {
    throw ShapeError("pool: " + std::to_string(fine.rows()) + " rows for a level with " +
                     std::to_string(map.fine_count()) + " faces");
  }
  FeatureTensor out(map.coarse_count(), fine.cols());
  for (int p = 0; p < map.coarse_count(); ++p) {
    const auto& ch = map.children[p];
    for (int c = 0; c < fine.cols(); ++c) {
      if (mode == PoolMode::Max) {
        out(p, c) = std::max({fine(ch[0], c), fine(ch[1], c), fine(ch[2], c), fine(ch[3], c)});
      } else {
        out(p, c) = ((fine(ch[0], c) + fine(ch[1], c)) + (fine(ch[2], c) + fine(ch[3], c))) * 0.25;
      }
    }
  }
  out.level = fine.level >= 0 ? fine.level - 1 : -1;
  return out;
}

FeatureTensor upsample_nearest(const FeatureTensor& coarse, const FaceMap& map) {
  if (coarse.rows() != map.coarse_count()) {
    throw ShapeError("upsample_nearest: row count does not match the coarse face count");
  }
  FeatureTensor out(map.fine_count(), coarse.cols());
  for (int f = 0; f < map.fine_count(); ++f) {
    std::copy_n(coarse.row(map.parent_of[f]).begin(), coarse.cols(), out.row(f).begin());
  }
  out.level = coarse.level >= 0 ? coarse.level + 1 : -1;
  return out;
}

BilinearStencil bilinear_stencil(const FaceMap& map, const Mesh& fine) {
  if (fine.face_count() != map.fine_count()) {
    throw ShapeError("bilinear_stencil: fine mesh does not match the face map");
  }
  BilinearStencil s;
  s.source.resize(map.fine_count());
  s.weight.resize(map.fine_count());
  for (int f = 0; f < map.fine_count(); ++f) {
    const int p = map.parent_of[f];
    if (map.central_child[p] == f) {
      s.source[f] = {p, p, p};
      s.weight[f] = {1.0, 0.0, 0.0};
      continue;
    }
    std::array<int, 3> src{p, -1, -1};
    int k = 1;
    for (int n : fine.neighbors(f)) {
      if (n == map.central_child[p]) continue;
      if (k > 2) throw TopologyError("bilinear_stencil: corner child has more than two outer neighbors");
      src[k++] = map.parent_of[n];
    }
    if (k != 3) throw TopologyError("bilinear_stencil: corner child is not adjacent to its central sibling");
    s.source[f] = src;
    s.weight[f] = {0.5, 0.25, 0.25};
  }
  return s;
}

FeatureTensor upsample_bilinear(const FeatureTensor& coarse, const BilinearStencil& stencil) {
  const int nf = static_cast<int>(stencil.source.size());
  FeatureTensor out(nf, coarse.cols());
  for (int f = 0; f < nf; ++f) {
    const auto& src = stencil.source[f];
    const auto& w = stencil.weight[f];
    for (int c = 0; c < coarse.cols(); ++c) {
      out(f, c) = w[0] * coarse(src[0], c) + w[1] * coarse(src[1], c) + w[2] * coarse(src[2], c);
    }
  }
  out.level = coarse.level >= 0 ? coarse.level + 1 : -1;
  return out;
}

FeatureTensor upsample_bilinear(const FeatureTensor& coarse, const FaceMap& map, const Mesh& fine) {
  if (coarse.rows() != map.coarse_count()) {
    throw ShapeError("upsample_bilinear: row count does not match the coarse face count");
  }
  return upsample_bilinear(coarse, bilinear_stencil(map, fine));
}

}  // namespace subdivnet
