#include "subdivnet/bvh.h"

#include <algorithm>
#include <limits>

#include "subdivnet/error.h"

namespace subdivnet {

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return {a, {1, 0, 0}};
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return {b, {0, 1, 0}};
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, {1 - v, v, 0}};
  }
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return {c, {0, 0, 1}};
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, {1 - w, 0, w}};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), {0, 1 - w, w}};
  }
  const double denom = va + vb + vc;
  if (!(denom > 0)) {
    // Degenerate triangle: fall back to the closest vertex.
    const double da = dot(p - a, p - a), db = dot(p - b, p - b), dc = dot(p - c, p - c);
    if (da <= db && da <= dc) return {a, {1, 0, 0}};
    return db <= dc ? TrianglePoint{b, {0, 1, 0}} : TrianglePoint{c, {0, 0, 1}};
  }
  const double v = vb / denom, w = vc / denom;
  return {a + v * ab + w * ac, {1 - v - w, v, w}};
}

FaceBvh::FaceBvh(const Mesh& mesh) : mesh_(&mesh) {
  if (mesh.face_count() == 0) throw Error("cannot build a face hierarchy over an empty mesh");
  order_.resize(mesh.face_count());
  centroids_.resize(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    order_[f] = f;
    centroids_[f] = mesh.centroid(f);
  }
  nodes_.reserve(2 * mesh.face_count());
  build(0, mesh.face_count());
}

int FaceBvh::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (int i = begin; i < end; ++i) {
    for (int v : mesh_->face(order_[i])) {
      const Vec3& p = mesh_->position(v);
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= 4) return id;
  int axis = 0;
  for (int k = 1; k < 3; ++k) {
    if (hi[k] - lo[k] > hi[axis] - lo[axis]) axis = k;
  }
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (centroids_[a][axis] != centroids_[b][axis]) return centroids_[a][axis] < centroids_[b][axis];
                     return a < b;
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

double box_distance2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d = 0;
  for (int k = 0; k < 3; ++k) {
    const double e = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
    d += e * e;
  }
  return d;
}

}  // namespace

void FaceBvh::query(int node, const Vec3& p, NearestFace& best, double& best_d2) const {
  const Node& n = nodes_[node];
  if (box_distance2(p, n.lo, n.hi) > best_d2) return;
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const int f = order_[i];
      const Face& t = mesh_->face(f);
      const auto cp = closest_point_on_triangle(p, mesh_->position(t[0]), mesh_->position(t[1]),
                                                mesh_->position(t[2]));
      const double d2 = dot(cp.point - p, cp.point - p);
      if (d2 < best_d2 || (d2 == best_d2 && f < best.face)) {
        best_d2 = d2;
        best.face = f;
        best.point = cp.point;
      }
    }
    return;
  }
  const double dl = box_distance2(p, nodes_[n.left].lo, nodes_[n.left].hi);
  const double dr = box_distance2(p, nodes_[n.right].lo, nodes_[n.right].hi);
  if (dl <= dr) {
    query(n.left, p, best, best_d2);
    query(n.right, p, best, best_d2);
  } else {
    query(n.right, p, best, best_d2);
    query(n.left, p, best, best_d2);
  }
}

NearestFace FaceBvh::nearest(const Vec3& p) const {
  NearestFace best;
  double best_d2 = std::numeric_limits<double>::infinity();
  query(0, p, best, best_d2);
  best.distance = std::sqrt(best_d2);
  return best;
}

}  // namespace subdivnet
