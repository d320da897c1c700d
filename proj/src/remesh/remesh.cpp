#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <random>

#include "subdivnet/bvh.h"
#include "subdivnet/error.h"
#include "subdivnet/parallel.h"
#include "subdivnet/remesh.h"

namespace subdivnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Curvature values closer than this are treated as ties and ordered randomly.
constexpr double kCurvatureBin = 0.02;

std::vector<std::vector<int>> vertex_neighbors(const Mesh& mesh) {
  std::vector<std::vector<int>> nb(mesh.vertex_count());
  for (const auto& [a, b] : unique_edges(mesh)) {
    nb[a].push_back(b);
    nb[b].push_back(a);
  }
  return nb;
}

std::vector<double> angle_defects(const Mesh& mesh) {
  std::vector<double> total(mesh.vertex_count(), 0.0);
  for (const Face& f : mesh.faces()) {
    for (int i = 0; i < 3; ++i) {
      total[f[i]] += angle_between(mesh.position(f[i]), mesh.position(f[(i + 1) % 3]),
                                   mesh.position(f[(i + 2) % 3]));
    }
  }
  for (double& t : total) t = std::abs(kTwoPi - t);
  return total;
}

/// Star area of every vertex.
std::vector<int> priority_order(const std::vector<double>& curvature, std::uint64_t seed) {
  std::vector<int> order(curvature.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> key(curvature.size());
  for (auto& k : key) k = rng();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ba = std::floor(curvature[a] / kCurvatureBin), bb = std::floor(curvature[b] / kCurvatureBin);
    if (ba != bb) return ba < bb;
    if (key[a] != key[b]) return key[a] < key[b];
    return a < b;
  });
  return order;
}

std::vector<int> greedy_independent(const std::vector<int>& order, const std::vector<std::vector<int>>& nb,
                                    const std::vector<bool>& excluded) {
  std::vector<bool> blocked = excluded;
  std::vector<int> chosen;
  for (int v : order) {
    if (blocked[v]) continue;
    chosen.push_back(v);
    blocked[v] = true;
    for (int w : nb[v]) blocked[w] = true;
  }
  return chosen;
}

using Quadric = std::array<double, 10>;  // upper triangle of a symmetric 4x4

Quadric plane_quadric(const Vec3& n, double d, double weight) {
  const double a = n.x, b = n.y, c = n.z;
  return {weight * a * a, weight * a * b, weight * a * c, weight * a * d, weight * b * b,
          weight * b * c, weight * b * d, weight * c * c, weight * c * d, weight * d * d};
}

double quadric_error(const Quadric& q, const Vec3& p) {
  const double x = p.x, y = p.y, z = p.z;
  return q[0] * x * x + 2 * q[1] * x * y + 2 * q[2] * x * z + 2 * q[3] * x + q[4] * y * y +
         2 * q[5] * y * z + 2 * q[6] * y + q[7] * z * z + 2 * q[8] * z + q[9];
}

/// One round of vertex removal. Returns the number of removed vertices.
int maps_round(DecimationState& state, int base_size, std::uint64_t seed) {
  std::vector<int> slot_to_face, vertex_to_new;
  const Mesh current = state.current_mesh(&slot_to_face, &vertex_to_new);
  std::vector<int> new_to_vertex(current.vertex_count());
  for (int v = 0; v < static_cast<int>(vertex_to_new.size()); ++v) {
    if (vertex_to_new[v] >= 0) new_to_vertex[vertex_to_new[v]] = v;
  }
  const auto candidates = max_independent_set(current, seed);
  int removed = 0;
  for (int c : candidates) {
    if (state.face_count() - 2 < base_size) break;
    removed += state.remove_vertex(new_to_vertex[c]);
  }
  return removed;
}

int liu_round(DecimationState& state, int base_size, std::uint64_t seed, std::vector<Quadric>& quadrics) {
  const Mesh& orig = state.original();
  std::vector<int> vertex_to_new;
  const Mesh current = state.current_mesh(nullptr, &vertex_to_new);
  std::vector<int> new_to_vertex(current.vertex_count());
  for (int v = 0; v < static_cast<int>(vertex_to_new.size()); ++v) {
    if (vertex_to_new[v] >= 0) new_to_vertex[vertex_to_new[v]] = v;
  }
  const auto nb = vertex_neighbors(current);
  // Cheapest collapse target per vertex.
  std::vector<double> cost(current.vertex_count(), 1e300);
  std::vector<std::vector<std::pair<double, int>>> targets(current.vertex_count());
  for (int c = 0; c < current.vertex_count(); ++c) {
    const int u = new_to_vertex[c];
    for (int wc : nb[c]) {
      const int w = new_to_vertex[wc];
      Quadric q = quadrics[u];
      for (int k = 0; k < 10; ++k) q[k] += quadrics[w][k];
      targets[c].push_back({quadric_error(q, orig.position(w)), w});
    }
    std::sort(targets[c].begin(), targets[c].end());
    if (!targets[c].empty()) cost[c] = targets[c].front().first;
  }
  std::vector<int> order(current.vertex_count());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cost[a] < cost[b]; });
  std::vector<bool> excluded(current.vertex_count(), false);
  for (int c = 0; c < current.vertex_count(); ++c) excluded[c] = nb[c].size() < 3;
  const auto chosen = greedy_independent(order, nb, excluded);
  int removed = 0;
  for (int c : chosen) {
    if (state.face_count() - 2 < base_size) break;
    const int u = new_to_vertex[c];
    for (const auto& [unused, w] : targets[c]) {
      if (state.collapse_edge(u, w)) {
        for (int k = 0; k < 10; ++k) quadrics[w][k] += quadrics[u][k];
        ++removed;
        break;
      }
    }
  }
  return removed;
}

}  // namespace

std::vector<int> max_independent_set(const Mesh& mesh, std::uint64_t seed, const std::set<int>& protected_vertices) {
  const auto nb = vertex_neighbors(mesh);
  const auto order = priority_order(angle_defects(mesh), seed);
  std::vector<bool> excluded(mesh.vertex_count(), false);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    excluded[v] = nb[v].size() < 3 || protected_vertices.count(v) > 0;
  }
  return greedy_independent(order, nb, excluded);
}

DecimationResult decimate_to_base(const Mesh& mesh, int base_size, DecimationOptions options) {
  if (base_size < 4) throw Error("base size must be at least 4");
  const MeshStats stats = validate_closed_manifold(mesh);
  if (!stats.is_closed_manifold) throw TopologyError("remeshing requires a closed 2-manifold");
  if (!stats.is_connected) throw TopologyError("remeshing requires a connected mesh");

  DecimationState state(mesh, options);
  std::vector<Quadric> quadrics;
  if (options.method == DecimationMethod::Liu) {
    quadrics.assign(mesh.vertex_count(), Quadric{});
    for (int f = 0; f < mesh.face_count(); ++f) {
      const Vec3 an = mesh.area_normal(f);
      const double len = norm(an);
      if (!(len > 0)) continue;
      const Vec3 n = an / len;
      const Quadric q = plane_quadric(n, -dot(n, mesh.position(mesh.face(f)[0])), 0.5 * len);
      for (int v : mesh.face(f)) {
        for (int k = 0; k < 10; ++k) quadrics[v][k] += q[k];
      }
    }
  }
  std::mt19937_64 seeds(options.seed);
  while (state.face_count() - 2 >= base_size) {
    const std::uint64_t round_seed = seeds();
    const int removed = options.method == DecimationMethod::Maps
                            ? maps_round(state, base_size, round_seed)
                            : liu_round(state, base_size, round_seed, quadrics);
    if (removed == 0) {
      if (state.stretch_limit() <= 0 || state.stretch_limit() > 1e6) break;
      state.set_stretch_limit(state.stretch_limit() * 2);
    }
  }

  DecimationResult out;
  std::vector<int> slot_to_face, vertex_to_new;
  out.base = state.current_mesh(&slot_to_face, &vertex_to_new);
  out.base_to_original.resize(out.base.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (vertex_to_new[v] >= 0) out.base_to_original[vertex_to_new[v]] = v;
  }
  out.fragments.resize(out.base.face_count());
  out.param.hosted.resize(out.base.face_count());
  for (int s = 0; s < state.slot_count(); ++s) {
    if (slot_to_face[s] >= 0) out.fragments[slot_to_face[s]] = state.fragments(s);
  }
  const auto base_vertex_faces = vertex_face_lists(out.base);
  out.param.vertices.resize(mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    SurfacePoint p;
    if (state.vertex_alive(v)) {
      const int nv = vertex_to_new[v];
      p.face = *std::min_element(base_vertex_faces[nv].begin(), base_vertex_faces[nv].end());
      p.bary[out.base.local_index(p.face, nv)] = 1.0;
    } else {
      p = state.vertex_image(v);
      p.face = slot_to_face[p.face];
    }
    out.param.vertices[v] = p;
    out.param.hosted[p.face].push_back(v);
  }
  const int achieved = out.base.face_count();
  out.reached_target = achieved >= base_size && achieved < 2 * base_size;
  out.message = "base mesh has " + std::to_string(achieved) + " faces (requested " +
                std::to_string(base_size) + ", method " + method_name(options.method) + ")";
  if (!out.reached_target) out.message += "; target not reachable";
  return out;
}

namespace {

/// Maps a point given in base-face barycentrics to the original surface through
/// the fragments hosted by that face.
SurfacePoint evaluate(const std::vector<Fragment>& fragments, const Bary& q) {
  const Vec2 p{q[1], q[2]};
  const Fragment* best = nullptr;
  Bary best_l{};
  double best_min = -1e300;
  for (const Fragment& fr : fragments) {
    const Vec2 a{fr.host_bary[0][1], fr.host_bary[0][2]};
    const Vec2 b{fr.host_bary[1][1], fr.host_bary[1][2]};
    const Vec2 c{fr.host_bary[2][1], fr.host_bary[2][2]};
    if (std::max({a.x, b.x, c.x}) < p.x - 1e-9 || std::min({a.x, b.x, c.x}) > p.x + 1e-9 ||
        std::max({a.y, b.y, c.y}) < p.y - 1e-9 || std::min({a.y, b.y, c.y}) > p.y + 1e-9) {
      if (best_min >= 0) continue;
    }
    if (!(orient2d(a, b, c) > 0)) continue;
    const auto l = barycentric(p, a, b, c);
    const double m = std::min({l[0], l[1], l[2]});
    if (m > best_min) {
      best_min = m;
      best = &fr;
      best_l = l;
    }
  }
  if (!best) throw Error("parameterization has no fragment for a base face");
  for (double& x : best_l) x = std::max(0.0, x);
  const double s = best_l[0] + best_l[1] + best_l[2];
  for (double& x : best_l) x /= s;
  SurfacePoint out;
  out.face = best->original_face;
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) out.bary[k] += best_l[j] * best->orig_bary[j][k];
  }
  const double t = out.bary[0] + out.bary[1] + out.bary[2];
  for (double& x : out.bary) x /= t;
  return out;
}

Vec3 surface_position(const Mesh& mesh, const SurfacePoint& s) {
  const Face& t = mesh.face(s.face);
  return s.bary[0] * mesh.position(t[0]) + s.bary[1] * mesh.position(t[1]) + s.bary[2] * mesh.position(t[2]);
}

/// Tangential Laplacian relaxation of the vertices from `first` on, each step
/// projected back onto the original surface. Steps that would land on a face
/// facing away from the current one are skipped.
void relax_on_surface(const Mesh& original, const Mesh& fine, int first, int iterations,
                      std::vector<SurfacePoint>& sources, std::vector<Vec3>& positions) {
  if (iterations <= 0 || first >= fine.vertex_count()) return;
  const FaceBvh bvh(original);
  const auto nb = vertex_neighbors(fine);
  std::vector<Vec3> unit_normal(original.face_count());
  for (int f = 0; f < original.face_count(); ++f) unit_normal[f] = normalized(original.area_normal(f));
  std::vector<SurfacePoint> next_sources = sources;
  for (int it = 0; it < iterations; ++it) {
    parallel_for(first, fine.vertex_count(), [&](int v) {
      Vec3 c{};
      for (int w : nb[v]) c += positions[w];
      c = c / static_cast<double>(nb[v].size());
      const Vec3 n = unit_normal[sources[v].face];
      Vec3 d = c - positions[v];
      d -= dot(d, n) * n;
      const NearestFace hit = bvh.nearest(positions[v] + 0.5 * d);
      next_sources[v] = sources[v];
      if (hit.face < 0 || dot(unit_normal[hit.face], n) <= 0.5) return;
      const Face& t = original.face(hit.face);
      const auto cp = closest_point_on_triangle(hit.point, original.position(t[0]), original.position(t[1]),
                                                original.position(t[2]));
      next_sources[v] = {hit.face, cp.bary};
    }, 64);
    sources.swap(next_sources);
    for (int v = first; v < fine.vertex_count(); ++v) positions[v] = surface_position(original, sources[v]);
  }
}

}  // namespace

RemeshResult remesh(const Mesh& mesh, int base_size, int depth, DecimationOptions options) {
  if (depth < 0) throw Error("depth must be non-negative");
  DecimationResult dec = decimate_to_base(mesh, base_size, options);
  RemeshResult out;
  out.param = dec.param;
  out.reached_target = dec.reached_target;
  out.message = dec.message;

  // Topology chain and, per face, its base face and corner parameters.
  std::vector<Mesh> levels{dec.base};
  std::vector<FaceMap> maps;
  std::vector<int> face_base(dec.base.face_count());
  std::vector<std::array<Bary, 3>> face_param(dec.base.face_count());
  for (int f = 0; f < dec.base.face_count(); ++f) {
    face_base[f] = f;
    face_param[f] = {Bary{1, 0, 0}, Bary{0, 1, 0}, Bary{0, 0, 1}};
  }
  auto mid = [](const Bary& a, const Bary& b) { return Bary{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])}; };
  for (int l = 0; l < depth; ++l) {
    SplitResult split = loop_split(levels.back());
    std::vector<int> child_base(split.fine.face_count());
    std::vector<std::array<Bary, 3>> child_param(split.fine.face_count());
    for (int p = 0; p < levels.back().face_count(); ++p) {
      const auto& [A, B, C] = face_param[p];
      const Bary ab = mid(A, B), bc = mid(B, C), ca = mid(C, A);
      const auto& ch = split.map.children[p];
      child_param[ch[0]] = {A, ab, ca};
      child_param[ch[1]] = {ab, B, bc};
      child_param[ch[2]] = {ca, bc, C};
      child_param[ch[3]] = {ab, bc, ca};
      for (int c : ch) child_base[c] = face_base[p];
    }
    face_base = std::move(child_base);
    face_param = std::move(child_param);
    levels.push_back(std::move(split.fine));
    maps.push_back(std::move(split.map));
  }

  const Mesh& fine = levels.back();
  std::vector<int> vertex_face(fine.vertex_count(), -1);
  std::vector<int> vertex_corner(fine.vertex_count(), -1);
  for (int f = 0; f < fine.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (vertex_face[fine.face(f)[k]] < 0) {
        vertex_face[fine.face(f)[k]] = f;
        vertex_corner[fine.face(f)[k]] = k;
      }
    }
  }
  out.finest_sources.resize(fine.vertex_count());
  std::vector<Vec3> positions(fine.vertex_count());
  const auto original_vertex_faces = vertex_face_lists(mesh);
  parallel_for(0, fine.vertex_count(), [&](int v) {
    SurfacePoint src;
    if (v < dec.base.vertex_count()) {
      // Base vertices are original vertices.
      const int ov = dec.base_to_original[v];
      src.face = original_vertex_faces[ov].front();
      src.bary[mesh.local_index(src.face, ov)] = 1.0;
    } else {
      const int f = vertex_face[v];
      src = evaluate(dec.fragments[face_base[f]], face_param[f][vertex_corner[v]]);
    }
    positions[v] = surface_position(mesh, src);
    out.finest_sources[v] = src;
  }, 64);
  relax_on_surface(mesh, fine, dec.base.vertex_count(), options.relax_iterations, out.finest_sources, positions);

  for (Mesh& level : levels) {
    std::vector<Vec3> p(positions.begin(), positions.begin() + level.vertex_count());
    level = level.with_positions(std::move(p));
  }
  out.pyramid.levels = std::move(levels);
  out.pyramid.maps = std::move(maps);

  // Independent re-check: the finest mesh alone must coarsen `depth` times.
  if (depth > 0) {
    Mesh topo = out.pyramid.finest();
    for (int l = 0; l < depth; ++l) {
      auto c = detect_subdivision_connectivity(topo);
      if (!c) throw TopologyError("remeshed output failed subdivision verification at step " + std::to_string(l + 1));
      topo = std::move(c->coarse);
    }
  }
  return out;
}

std::string param_map_json(const ParamMap& map) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["base_faces"] = map.hosted.size();
  auto verts = nlohmann::json::array();
  for (const SurfacePoint& p : map.vertices) {
    verts.push_back({{"face", p.face}, {"bary", p.bary}});
  }
  j["vertices"] = std::move(verts);
  return j.dump();
}

std::vector<int> transfer_labels(const Mesh& source, std::span<const int> source_labels, const Mesh& target) {
  if (source.face_count() == 0) throw Error("label transfer needs a non-empty source mesh");
  if (static_cast<int>(source_labels.size()) != source.face_count()) {
    throw ShapeError("label count does not match source face count");
  }
  const FaceBvh bvh(source);
  std::vector<int> out(target.face_count());
  parallel_for(0, target.face_count(), [&](int f) { out[f] = source_labels[bvh.nearest(target.centroid(f)).face]; }, 128);
  return out;
}

}  // namespace subdivnet
