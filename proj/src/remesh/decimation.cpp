#include <algorithm>
#include <cmath>
#include <numbers>

#include "subdivnet/error.h"
#include "subdivnet/planar.h"
#include "subdivnet/remesh.h"

namespace subdivnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Bary normalized_bary(Bary b) {
  for (double& x : b) x = std::max(0.0, x);
  const double s = b[0] + b[1] + b[2];
  if (!(s > 0)) return {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (double& x : b) x /= s;
  return b;
}

/// Cell containing p (largest minimum barycentric) and the clamped coordinates.
std::pair<int, Bary> locate(const Vec2& p, std::span<const std::array<Vec2, 3>> cells) {
  int best = 0;
  Bary best_bary{};
  double best_min = -1e300;
  for (int c = 0; c < static_cast<int>(cells.size()); ++c) {
    const auto b = barycentric(p, cells[c][0], cells[c][1], cells[c][2]);
    const double m = std::min({b[0], b[1], b[2]});
    if (m > best_min) {
      best_min = m;
      best = c;
      best_bary = b;
    }
  }
  return {best, normalized_bary(best_bary)};
}

/// Ratio of singular values of the affine map taking planar triangle p onto q.
double anisotropy(const std::array<Vec2, 3>& p, const Vec3& q0, const Vec3& q1, const Vec3& q2) {
  const Vec3 e1 = q1 - q0, e2 = q2 - q0;
  const double l1 = norm(e1);
  const Vec3 u = e1 / l1;
  const Vec3 w = normalized(e2 - dot(e2, u) * u);
  // Columns of Q and P in local frames.
  const double qa = l1, qb = 0, qc = dot(e2, u), qd = dot(e2, w);
  const Vec2 p1 = p[1] - p[0], p2 = p[2] - p[0];
  const double det = cross(p1, p2);
  if (!(std::abs(det) > 0)) return 1e300;
  // A = Q * inverse(P), P = [p1 p2].
  const double i00 = p2.y / det, i01 = -p2.x / det, i10 = -p1.y / det, i11 = p1.x / det;
  const double a = qa * i00 + qc * i10, b = qa * i01 + qc * i11;
  const double c = qb * i00 + qd * i10, d = qb * i01 + qd * i11;
  const double s = a * a + b * b + c * c + d * d;
  const double t = std::sqrt(std::max(0.0, (a * a + b * b - c * c - d * d) * (a * a + b * b - c * c - d * d) +
                                               4 * (a * c + b * d) * (a * c + b * d)));
  const double smax = std::sqrt(0.5 * (s + t)), smin = std::sqrt(std::max(0.0, 0.5 * (s - t)));
  return smin > 0 ? smax / smin : 1e300;
}

Vec2 combine(const Bary& b, const std::array<Vec2, 3>& p) {
  return b[0] * p[0] + b[1] * p[1] + b[2] * p[2];
}

Bary combine(const Bary& l, const std::array<Bary, 3>& b) {
  Bary out{};
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) out[k] += l[j] * b[j][k];
  }
  return out;
}

}  // namespace

DecimationMethod parse_method(const std::string& name) {
  if (name == "maps") return DecimationMethod::Maps;
  if (name == "liu") return DecimationMethod::Liu;
  throw Error("unknown remeshing method '" + name + "' (expected maps or liu)");
}

std::string method_name(DecimationMethod method) {
  return method == DecimationMethod::Maps ? "maps" : "liu";
}

DecimationState::DecimationState(const Mesh& original, DecimationOptions options)
    : original_(&original), options_(options) {
  const double diag = bounding_box_diagonal(original);
  degenerate_area_ = 1e-14 * diag * diag;
  faces_ = original.faces();
  const int nf = original.face_count();
  const int nv = original.vertex_count();
  face_alive_.assign(nf, true);
  vertex_faces_ = vertex_face_lists(original);
  vertex_alive_.resize(nv);
  for (int v = 0; v < nv; ++v) {
    vertex_alive_[v] = !vertex_faces_[v].empty();
    alive_vertices_ += vertex_alive_[v];
  }
  alive_faces_ = nf;
  fragments_.resize(nf);
  for (int f = 0; f < nf; ++f) {
    Fragment fr;
    fr.original_face = f;
    fr.host_bary = {Bary{1, 0, 0}, Bary{0, 1, 0}, Bary{0, 0, 1}};
    fr.orig_bary = fr.host_bary;
    fragments_[f].push_back(fr);
  }
  images_.assign(nv, SurfacePoint{});
  hosted_.resize(nf);
  fragment_count_ = nf;
  stretch_limit_ = options_.max_stretch;
  fragment_limit_ = static_cast<std::size_t>(options_.fragment_budget) * std::max(nf, 1) + 100000;
}

bool DecimationState::star(int v, Star& out) const {
  out.vertex = v;
  out.ring.clear();
  out.slots.clear();
  const auto& inc = vertex_faces_[v];
  if (inc.size() < 3) return false;
  // Face (v, a, b) counterclockwise: b follows a in the ring.
  std::vector<std::array<int, 3>> wedges;  // a, b, slot
  for (int s : inc) {
    const Face& f = faces_[s];
    for (int i = 0; i < 3; ++i) {
      if (f[i] == v) wedges.push_back({f[(i + 1) % 3], f[(i + 2) % 3], s});
    }
  }
  std::sort(wedges.begin(), wedges.end());
  for (std::size_t i = 1; i < wedges.size(); ++i) {
    if (wedges[i][0] == wedges[i - 1][0]) return false;
  }
  int a = wedges.front()[0];
  for (std::size_t step = 0; step < wedges.size(); ++step) {
    const auto it = std::lower_bound(wedges.begin(), wedges.end(), std::array<int, 3>{a, -1, -1});
    if (it == wedges.end() || (*it)[0] != a) return false;
    out.ring.push_back(a);
    out.slots.push_back((*it)[2]);
    a = (*it)[1];
  }
  if (a != out.ring.front()) return false;
  std::vector<int> sorted = out.ring;
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
}

std::vector<int> DecimationState::one_ring(int v) const {
  Star s;
  if (!vertex_alive_[v] || !star(v, s)) return {};
  return s.ring;
}

double DecimationState::total_angle(int v) const {
  double total = 0;
  const Vec3& p = original_->position(v);
  for (int s : vertex_faces_[v]) {
    const Face& f = faces_[s];
    for (int i = 0; i < 3; ++i) {
      if (f[i] == v) {
        total += angle_between(p, original_->position(f[(i + 1) % 3]), original_->position(f[(i + 2) % 3]));
      }
    }
  }
  return total;
}

bool DecimationState::flatten(const Star& s, std::vector<Vec2>& uv, double& total) const {
  const int n = static_cast<int>(s.ring.size());
  const Vec3& p = original_->position(s.vertex);
  std::vector<double> theta(n), radius(n);
  total = 0;
  for (int i = 0; i < n; ++i) {
    theta[i] = angle_between(p, original_->position(s.ring[i]), original_->position(s.ring[(i + 1) % n]));
    radius[i] = norm(original_->position(s.ring[i]) - p);
    if (!(radius[i] > 0) || !(theta[i] > 0)) return false;
    total += theta[i];
  }
  const double a = kTwoPi / total;
  const double rmax = *std::max_element(radius.begin(), radius.end());
  uv.resize(n);
  double phi = 0;
  for (int i = 0; i < n; ++i) {
    if (a * theta[i] >= std::numbers::pi - 1e-6) return false;
    const double r = std::pow(radius[i] / rmax, a);
    uv[i] = {r * std::cos(phi), r * std::sin(phi)};
    phi += a * theta[i];
  }
  return true;
}

void DecimationState::set_face(int slot, const Face& f) {
  faces_[slot] = f;
  if (!face_alive_[slot]) {
    face_alive_[slot] = true;
    ++alive_faces_;
  }
  for (int v : f) vertex_faces_[v].push_back(slot);
}

void DecimationState::kill_face(int slot) {
  for (int v : faces_[slot]) {
    auto& inc = vertex_faces_[v];
    inc.erase(std::remove(inc.begin(), inc.end(), slot), inc.end());
  }
  if (face_alive_[slot]) {
    face_alive_[slot] = false;
    --alive_faces_;
  }
  fragments_[slot].clear();
  hosted_[slot].clear();
}

bool DecimationState::replace_star(const Star& s, const std::vector<Vec2>& uv,
                                   const std::vector<std::array<int, 3>>& tris) {
  const int n = static_cast<int>(s.ring.size());
  if (static_cast<int>(tris.size()) != n - 2 || alive_vertices_ - 1 < 4) return false;
  std::vector<std::array<Vec2, 3>> cells(tris.size());
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (int k = 0; k < 3; ++k) cells[t][k] = uv[tris[t][k]];
    if (orient2d(cells[t][0], cells[t][1], cells[t][2]) <= 0) return false;
  }

  // Geometry and topology checks on the new faces.
  Vec3 star_normal{};
  for (int slot : s.slots) {
    const Face& f = faces_[slot];
    star_normal += cross(original_->position(f[1]) - original_->position(f[0]),
                         original_->position(f[2]) - original_->position(f[0]));
  }
  if (stretch_limit_ > 0) {
    for (int i = 0; i < n; ++i) {
      const std::array<Vec2, 3> old{Vec2{0, 0}, uv[i], uv[(i + 1) % n]};
      if (anisotropy(old, original_->position(s.vertex), original_->position(s.ring[i]),
                     original_->position(s.ring[(i + 1) % n])) > stretch_limit_) {
        return false;
      }
    }
  }
  std::vector<int> gained(n, 0);
  for (const auto& t : tris) {
    const Vec3 a = original_->position(s.ring[t[0]]);
    const Vec3 b = original_->position(s.ring[t[1]]);
    const Vec3 c = original_->position(s.ring[t[2]]);
    const Vec3 nrm = cross(b - a, c - a);
    if (0.5 * norm(nrm) <= degenerate_area_) return false;
    if (dot(nrm, star_normal) <= 0) return false;
    if (stretch_limit_ > 0) {
      const std::array<Vec2, 3> cell{uv[t[0]], uv[t[1]], uv[t[2]]};
      if (anisotropy(cell, a, b, c) > stretch_limit_) return false;
    }
    if (options_.min_angle > 0) {
      if (angle_between(a, b, c) < options_.min_angle || angle_between(b, c, a) < options_.min_angle ||
          angle_between(c, a, b) < options_.min_angle) {
        return false;
      }
    }
    for (int k = 0; k < 3; ++k) {
      const int i = t[k], j = t[(k + 1) % 3];
      ++gained[i];
      if ((i + 1) % n == j || (j + 1) % n == i) continue;
      // A diagonal must not duplicate an edge that already exists outside the star.
      const int u = s.ring[i], w = s.ring[j];
      for (int slot : vertex_faces_[u]) {
        const Face& f = faces_[slot];
        if (f[0] == w || f[1] == w || f[2] == w) return false;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    const int valence = static_cast<int>(vertex_faces_[s.ring[i]].size()) - 2 + gained[i];
    if (valence < 3) return false;
  }

  // Re-host fragments and vertex images in the flattened domain.
  std::vector<std::vector<Fragment>> new_fragments(tris.size());
  std::vector<std::vector<int>> new_hosted(tris.size());
  std::vector<std::pair<int, Bary>> moved_images;
  std::size_t added = 0;
  for (int i = 0; i < n; ++i) {
    const int slot = s.slots[i];
    const Face& f = faces_[slot];
    std::array<Vec2, 3> corner;
    for (int k = 0; k < 3; ++k) {
      if (f[k] == s.vertex) {
        corner[k] = {0, 0};
      } else {
        corner[k] = f[k] == s.ring[i] ? uv[i] : uv[(i + 1) % n];
      }
    }
    for (const Fragment& fr : fragments_[slot]) {
      std::array<Vec2, 3> p;
      for (int k = 0; k < 3; ++k) p[k] = combine(fr.host_bary[k], corner);
      const double area = 0.5 * orient2d(p[0], p[1], p[2]);
      std::vector<ClipPiece> pieces;
      if (area > 1e-15) pieces = split_flipped(p, cells, 1e-9 * area);
      // A fragment whose planar image has collapsed covers no measurable part of
      // the domain and is dropped.
      for (const ClipPiece& piece : pieces) {
        const auto& poly = piece.polygon;
        const auto& cell = cells[piece.cell];
        for (std::size_t t = 1; t + 1 < poly.size(); ++t) {
          const std::array<Vec2, 3> q{poly[0], poly[t], poly[t + 1]};
          if (orient2d(q[0], q[1], q[2]) <= 2e-15) continue;
          Fragment g;
          g.original_face = fr.original_face;
          for (int k = 0; k < 3; ++k) {
            g.host_bary[k] = normalized_bary(barycentric(q[k], cell[0], cell[1], cell[2]));
            g.orig_bary[k] = normalized_bary(combine(normalized_bary(barycentric(q[k], p[0], p[1], p[2])), fr.orig_bary));
          }
          const auto& h = g.host_bary;
          if ((h[1][1] - h[0][1]) * (h[2][2] - h[0][2]) - (h[1][2] - h[0][2]) * (h[2][1] - h[0][1]) <= 0) continue;
          new_fragments[piece.cell].push_back(g);
          ++added;
        }
      }
    }
    for (int ov : hosted_[slot]) {
      const auto [cell, b] = locate(combine(images_[ov].bary, corner), cells);
      moved_images.push_back({ov, b});
      new_hosted[cell].push_back(ov);
      images_[ov].face = cell;  // provisional: cell index, fixed below
    }
  }
  std::size_t removed = 0;
  for (int slot : s.slots) removed += fragments_[slot].size();
  if (fragment_count_ - removed + added > fragment_limit_) {
    throw Error("remeshing exceeded the fragment budget (pathological input)");
  }
  fragment_count_ = fragment_count_ - removed + added;
  const auto [vcell, vbary] = locate({0, 0}, cells);

  if (options_.keep_flattenings) {
    Flattening fl;
    fl.vertex = s.vertex;
    fl.ring = s.ring;
    fl.ring_uv = uv;
    double total = 0;
    for (int i = 0; i < n; ++i) {
      total += angle_between(original_->position(s.vertex), original_->position(s.ring[i]),
                             original_->position(s.ring[(i + 1) % n]));
    }
    fl.total_angle = total;
    fl.triangles = tris;
    flattenings_.push_back(std::move(fl));
  }

  for (int slot : s.slots) kill_face(slot);
  std::vector<int> new_slots(tris.size());
  for (std::size_t t = 0; t < tris.size(); ++t) {
    new_slots[t] = s.slots[t];
    set_face(new_slots[t], {s.ring[tris[t][0]], s.ring[tris[t][1]], s.ring[tris[t][2]]});
    fragments_[new_slots[t]] = std::move(new_fragments[t]);
    hosted_[new_slots[t]] = std::move(new_hosted[t]);
  }
  for (const auto& [ov, b] : moved_images) {
    images_[ov].face = new_slots[images_[ov].face];
    images_[ov].bary = b;
  }
  vertex_alive_[s.vertex] = false;
  --alive_vertices_;
  images_[s.vertex] = {new_slots[vcell], vbary};
  hosted_[new_slots[vcell]].push_back(s.vertex);
  return true;
}

bool DecimationState::remove_vertex(int v) {
  if (v < 0 || v >= static_cast<int>(vertex_alive_.size()) || !vertex_alive_[v]) return false;
  Star s;
  if (!star(v, s)) return false;
  std::vector<Vec2> uv;
  double total;
  if (!flatten(s, uv, total)) return false;
  const auto tris = triangulate_polygon(uv);
  if (tris.empty()) return false;
  return replace_star(s, uv, tris);
}

bool DecimationState::collapse_edge(int u, int w) {
  if (u < 0 || u >= static_cast<int>(vertex_alive_.size()) || !vertex_alive_[u]) return false;
  Star s;
  if (!star(u, s)) return false;
  const auto it = std::find(s.ring.begin(), s.ring.end(), w);
  if (it == s.ring.end()) return false;
  std::vector<Vec2> uv;
  double total;
  if (!flatten(s, uv, total)) return false;
  // Skip-on-flip: replace_star rejects inverted fan triangles.
  return replace_star(s, uv, fan_triangulation(static_cast<int>(s.ring.size()), static_cast<int>(it - s.ring.begin())));
}

Mesh DecimationState::current_mesh(std::vector<int>* slot_to_face, std::vector<int>* vertex_to_new) const {
  std::vector<int> remap(vertex_alive_.size(), -1);
  std::vector<Vec3> vertices;
  for (int v = 0; v < static_cast<int>(vertex_alive_.size()); ++v) {
    if (!vertex_alive_[v]) continue;
    remap[v] = static_cast<int>(vertices.size());
    vertices.push_back(original_->position(v));
  }
  std::vector<Face> faces;
  std::vector<int> slots(faces_.size(), -1);
  for (int s = 0; s < slot_count(); ++s) {
    if (!face_alive_[s]) continue;
    slots[s] = static_cast<int>(faces.size());
    faces.push_back({remap[faces_[s][0]], remap[faces_[s][1]], remap[faces_[s][2]]});
  }
  if (slot_to_face) *slot_to_face = std::move(slots);
  if (vertex_to_new) *vertex_to_new = remap;
  return Mesh(std::move(vertices), std::move(faces));
}

}  // namespace subdivnet
