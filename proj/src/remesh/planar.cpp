#include "subdivnet/planar.h"

#include <algorithm>
#include <cmath>
#include <map>

namespace subdivnet {

double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

double polygon_area(std::span<const Vec2> polygon) {
  double a = 0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    a += cross(polygon[i], polygon[(i + 1) % polygon.size()]);
  }
  return 0.5 * a;
}

namespace {

bool inside_or_on(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  return orient2d(a, b, p) >= 0 && orient2d(b, c, p) >= 0 && orient2d(c, a, p) >= 0;
}

void lawson_flips(std::span<const Vec2> pts, std::vector<std::array<int, 3>>& tris) {
  const int n = static_cast<int>(pts.size());
  auto boundary = [n](int a, int b) { return (a + 1) % n == b || (b + 1) % n == a; };
  for (int sweep = 0; sweep < 4 * n * n; ++sweep) {
    std::map<std::pair<int, int>, std::pair<int, int>> edges;  // directed edge -> (triangle, local)
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
      for (int j = 0; j < 3; ++j) edges[{tris[t][j], tris[t][(j + 1) % 3]}] = {t, j};
    }
    bool flipped = false;
    for (const auto& [e, tj] : edges) {
      const auto [a, b] = e;
      if (a > b || boundary(a, b)) continue;
      const auto it = edges.find({b, a});
      if (it == edges.end()) continue;
      const auto [t, j] = tj;
      const auto [u, k] = it->second;
      const int c = tris[t][(j + 2) % 3];
      const int d = tris[u][(k + 2) % 3];
      if (incircle(pts[a], pts[b], pts[c], pts[d]) <= 1e-14) continue;
      // The quad (a, d, b, c) must be strictly convex for the flip to be valid.
      if (orient2d(pts[c], pts[a], pts[d]) <= 0 || orient2d(pts[d], pts[b], pts[c]) <= 0) continue;
      tris[t] = {c, a, d};
      tris[u] = {d, b, c};
      flipped = true;
      break;
    }
    if (!flipped) return;
  }
}

}  // namespace

std::vector<std::array<int, 3>> triangulate_polygon(std::span<const Vec2> polygon) {
  const int n = static_cast<int>(polygon.size());
  std::vector<std::array<int, 3>> tris;
  if (n < 3) return tris;
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  while (idx.size() > 3) {
    const int m = static_cast<int>(idx.size());
    int best = -1;
    double best_quality = -1;
    for (int i = 0; i < m; ++i) {
      const int a = idx[(i + m - 1) % m], b = idx[i], c = idx[(i + 1) % m];
      if (orient2d(polygon[a], polygon[b], polygon[c]) <= 0) continue;
      bool blocked = false;
      for (int j = 0; j < m && !blocked; ++j) {
        const int p = idx[j];
        if (p == a || p == b || p == c) continue;
        blocked = inside_or_on(polygon[p], polygon[a], polygon[b], polygon[c]);
      }
      if (blocked) continue;
      // Prefer the ear with the largest minimum angle.
      const Vec2 u = polygon[a] - polygon[b], v = polygon[c] - polygon[b], w = polygon[c] - polygon[a];
      const double area = orient2d(polygon[a], polygon[b], polygon[c]);
      const double quality = area / std::max({dot(u, u), dot(v, v), dot(w, w)});
      if (quality > best_quality) {
        best_quality = quality;
        best = i;
      }
    }
    if (best < 0) return {};
    tris.push_back({idx[(best + m - 1) % m], idx[best], idx[(best + 1) % m]});
    idx.erase(idx.begin() + best);
  }
  if (orient2d(polygon[idx[0]], polygon[idx[1]], polygon[idx[2]]) <= 0) return {};
  tris.push_back({idx[0], idx[1], idx[2]});
  lawson_flips(polygon, tris);
  return tris;
}

std::vector<std::array<int, 3>> fan_triangulation(int n, int apex) {
  std::vector<std::array<int, 3>> tris;
  for (int i = 1; i + 1 < n; ++i) tris.push_back({apex, (apex + i) % n, (apex + i + 1) % n});
  return tris;
}

std::vector<Vec2> clip_to_triangle(std::span<const Vec2> polygon, const std::array<Vec2, 3>& tri) {
  std::vector<Vec2> out(polygon.begin(), polygon.end());
  for (int e = 0; e < 3 && !out.empty(); ++e) {
    const Vec2 a = tri[e], b = tri[(e + 1) % 3];
    std::vector<Vec2> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2 p = in[i], q = in[(i + 1) % in.size()];
      const double sp = orient2d(a, b, p), sq = orient2d(a, b, q);
      if (sp >= 0) out.push_back(p);
      if ((sp > 0 && sq < 0) || (sp < 0 && sq > 0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out.size() >= 3 ? out : std::vector<Vec2>{};
}

std::vector<ClipPiece> split_flipped(const std::array<Vec2, 3>& triangle,
                                     std::span<const std::array<Vec2, 3>> cells, double min_area) {
  std::vector<ClipPiece> pieces;
  const Vec2 lo{std::min({triangle[0].x, triangle[1].x, triangle[2].x}),
                std::min({triangle[0].y, triangle[1].y, triangle[2].y})};
  const Vec2 hi{std::max({triangle[0].x, triangle[1].x, triangle[2].x}),
                std::max({triangle[0].y, triangle[1].y, triangle[2].y})};
  for (int c = 0; c < static_cast<int>(cells.size()); ++c) {
    const auto& cell = cells[c];
    if (std::max({cell[0].x, cell[1].x, cell[2].x}) < lo.x || std::min({cell[0].x, cell[1].x, cell[2].x}) > hi.x ||
        std::max({cell[0].y, cell[1].y, cell[2].y}) < lo.y || std::min({cell[0].y, cell[1].y, cell[2].y}) > hi.y) {
      continue;
    }
    auto poly = clip_to_triangle(triangle, cell);
    if (poly.empty() || polygon_area(poly) <= min_area) continue;
    pieces.push_back({c, std::move(poly)});
  }
  return pieces;
}

}  // namespace subdivnet
