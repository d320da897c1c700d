#include "subdivnet/shapes.h"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

#include "subdivnet/error.h"
#include "subdivnet/hierarchy.h"

namespace subdivnet::shapes {

namespace {

/// Flips faces whose normal points towards the origin; valid for star-shaped solids
/// centered at the origin.
Mesh orient_outward(std::vector<Vec3> v, std::vector<Face> f) {
  for (Face& t : f) {
    const Vec3 n = cross(v[t[1]] - v[t[0]], v[t[2]] - v[t[0]]);
    if (dot(n, v[t[0]] + v[t[1]] + v[t[2]]) < 0) std::swap(t[1], t[2]);
  }
  return Mesh(std::move(v), std::move(f));
}

using Lattice = std::tuple<int, int, int>;

/// Collects quads on a lattice surface and deduplicates their corners.
class LatticeBuilder {
 public:
  int vertex(const Lattice& p) {
    auto [it, inserted] = ids_.try_emplace(p, static_cast<int>(points_.size()));
    if (inserted) points_.push_back(p);
    return it->second;
  }

  /// Quad (a, b, c, d) in counterclockwise order seen from outside.
  void quad(const Lattice& a, const Lattice& b, const Lattice& c, const Lattice& d, bool flip_diag) {
    const int ia = vertex(a), ib = vertex(b), ic = vertex(c), id = vertex(d);
    if (flip_diag) {
      faces_.push_back({ia, ib, id});
      faces_.push_back({ib, ic, id});
    } else {
      faces_.push_back({ia, ib, ic});
      faces_.push_back({ia, ic, id});
    }
  }

  Mesh build(double scale = 1.0) const {
    std::vector<Vec3> v;
    v.reserve(points_.size());
    for (const auto& [x, y, z] : points_) v.push_back(Vec3{double(x), double(y), double(z)} * scale);
    return Mesh(std::move(v), faces_);
  }

 private:
  std::map<Lattice, int> ids_;
  std::vector<Lattice> points_;
  std::vector<Face> faces_;
};

Lattice make_lattice(int axis, int level, int u, int w) {
  int p[3];
  p[axis] = level;
  p[(axis + 1) % 3] = u;
  p[(axis + 2) % 3] = w;
  return {p[0], p[1], p[2]};
}

/// Adds the unit square on plane x_axis = level spanning [u, u+1] x [w, w+1] with
/// outward normal along +axis (positive) or -axis.
void add_square(LatticeBuilder& b, int axis, int level, int u, int w, bool positive, bool flip) {
  const Lattice p00 = make_lattice(axis, level, u, w);
  const Lattice p10 = make_lattice(axis, level, u + 1, w);
  const Lattice p11 = make_lattice(axis, level, u + 1, w + 1);
  const Lattice p01 = make_lattice(axis, level, u, w + 1);
  if (positive) {
    b.quad(p00, p10, p11, p01, flip);
  } else {
    b.quad(p00, p01, p11, p10, flip);
  }
}

}  // namespace

Mesh tetrahedron() {
  return orient_outward({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}},
                        {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}});
}

Mesh octahedron() {
  return orient_outward({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}},
                        {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                         {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}});
}

Mesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p = normalized(p);
  return orient_outward(std::move(v),
                        {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}});
}

Mesh cube_grid(int n, std::optional<std::uint64_t> diagonal_seed) {
  if (n < 1) throw Error("cube_grid: n must be positive");
  std::mt19937_64 rng(diagonal_seed.value_or(0));
  std::bernoulli_distribution coin(0.5);
  LatticeBuilder b;
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side < 2; ++side) {
      for (int u = 0; u < n; ++u) {
        for (int w = 0; w < n; ++w) {
          const bool flip = diagonal_seed ? coin(rng) : false;
          add_square(b, axis, side * n, u, w, side == 1, flip);
        }
      }
    }
  }
  return b.build();
}

Mesh cube_sphere(int n, double radius, std::optional<std::uint64_t> diagonal_seed) {
  const Mesh grid = cube_grid(n, diagonal_seed);
  std::vector<Vec3> v = grid.vertices();
  const Vec3 center{n / 2.0, n / 2.0, n / 2.0};
  for (Vec3& p : v) p = normalized(p - center) * radius;
  return grid.with_positions(std::move(v));
}

Mesh icosphere(int levels) {
  Mesh m = icosahedron();
  for (int i = 0; i < levels; ++i) {
    m = loop_split(m).fine;
    std::vector<Vec3> v = m.vertices();
    for (Vec3& p : v) p = normalized(p);
    m = m.with_positions(std::move(v));
  }
  return m;
}

Mesh torus(int major_segments, int minor_segments, double major_radius, double minor_radius) {
  if (major_segments < 3 || minor_segments < 3) throw Error("torus: need at least 3 segments");
  std::vector<Vec3> v;
  std::vector<Face> f;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < major_segments; ++i) {
    const double u = two_pi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double w = two_pi * j / minor_segments;
      const double r = major_radius + minor_radius * std::cos(w);
      v.push_back({r * std::cos(u), r * std::sin(u), minor_radius * std::sin(w)});
    }
  }
  auto id = [&](int i, int j) {
    return (i % major_segments) * minor_segments + (j % minor_segments);
  };
  for (int i = 0; i < major_segments; ++i) {
    for (int j = 0; j < minor_segments; ++j) {
      f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return Mesh(std::move(v), std::move(f));
}

Mesh holed_plate(int genus, int refine) {
  if (genus < 0 || refine < 1) throw Error("holed_plate: invalid arguments");
  // Voxels (x, y, 0) for x in [0, 3), y in [0, 2g+1); holes at (1, 2h+1).
  const int nx = 3;
  const int ny = 2 * genus + 1;
  auto solid = [&](int x, int y, int z) {
    if (x < 0 || y < 0 || z != 0 || x >= nx || y >= ny) return false;
    return !(x == 1 && y % 2 == 1);
  };
  LatticeBuilder b;
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      if (!solid(x, y, 0)) continue;
      const int cell[3] = {x, y, 0};
      for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
          int nb[3] = {x, y, 0};
          nb[axis] += side == 1 ? 1 : -1;
          if (solid(nb[0], nb[1], nb[2])) continue;
          const int level = (cell[axis] + side) * refine;
          const int u0 = cell[(axis + 1) % 3] * refine;
          const int w0 = cell[(axis + 2) % 3] * refine;
          for (int u = 0; u < refine; ++u) {
            for (int w = 0; w < refine; ++w) {
              add_square(b, axis, level, u0 + u, w0 + w, side == 1, false);
            }
          }
        }
      }
    }
  }
  return b.build(1.0 / refine);
}

}  // namespace subdivnet::shapes
