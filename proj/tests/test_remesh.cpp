#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <random>
#include <set>

#include "oracles.h"
#include "subdivnet/error.h"
#include "subdivnet/hierarchy.h"
#include "subdivnet/planar.h"
#include "subdivnet/remesh.h"
#include "subdivnet/shapes.h"

using namespace subdivnet;

namespace {

double bary_area(const std::array<Bary, 3>& b) {
  return (b[1][1] - b[0][1]) * (b[2][2] - b[0][2]) - (b[1][2] - b[0][2]) * (b[2][1] - b[0][1]);
}

bool valid_bary(const Bary& b, double tol = 1e-9) {
  for (double x : b) {
    if (x < -tol || x > 1 + tol) return false;
  }
  return std::abs(b[0] + b[1] + b[2] - 1) <= tol;
}

Vec3 on_face(const Mesh& mesh, const Face& f, const Bary& b) {
  return b[0] * mesh.position(f[0]) + b[1] * mesh.position(f[1]) + b[2] * mesh.position(f[2]);
}

/// Flat hexagon fan around vertex 0 closed by an apex below.
Mesh hexagon_cap() {
  std::vector<Vec3> v{{0, 0, 0}};
  for (int k = 0; k < 6; ++k) {
    const double a = k * std::numbers::pi / 3;
    v.push_back({std::cos(a), std::sin(a), 0});
  }
  v.push_back({0, 0, -1});
  std::vector<Face> f;
  for (int k = 0; k < 6; ++k) {
    const int a = 1 + k, b = 1 + (k + 1) % 6;
    f.push_back({0, a, b});
    f.push_back({7, b, a});
  }
  return Mesh(std::move(v), std::move(f));
}

/// Apex t over the quad a b c d whose underside is split along a-c.
Mesh pinched_quad(double ac_half, double bd_half) {
  std::vector<Vec3> v{{0, 0, 0.2}, {ac_half, 0, 0}, {0, bd_half, 0}, {-ac_half, 0, 0}, {0, -bd_half, 0}};
  std::vector<Face> f{{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}, {2, 1, 3}, {4, 3, 1}};
  return Mesh(std::move(v), std::move(f));
}

void check_fragments(const DecimationState& s) {
  for (int slot = 0; slot < s.slot_count(); ++slot) {
    if (!s.face_alive(slot)) continue;
    for (const Fragment& fr : s.fragments(slot)) {
      for (int k = 0; k < 3; ++k) {
        REQUIRE(valid_bary(fr.host_bary[k]));
        REQUIRE(valid_bary(fr.orig_bary[k]));
      }
    }
  }
  for (int v = 0; v < s.original().vertex_count(); ++v) {
    if (s.vertex_alive(v)) continue;
    const SurfacePoint& p = s.vertex_image(v);
    REQUIRE(s.face_alive(p.face));
    REQUIRE(valid_bary(p.bary));
  }
}

std::int64_t euler(const Mesh& m) { return validate_closed_manifold(m).euler_characteristic; }

}  // namespace

TEST_CASE("hole triangulation is a valid constrained Delaunay triangulation") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> radius(0.4, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + trial % 9;
    std::vector<Vec2> poly;
    for (int i = 0; i < n; ++i) {
      const double a = 2 * std::numbers::pi * i / n;
      const double r = radius(rng);
      poly.push_back({r * std::cos(a), r * std::sin(a)});
    }
    const auto tris = triangulate_polygon(poly);
    REQUIRE(static_cast<int>(tris.size()) == n - 2);
    double area = 0;
    for (const auto& t : tris) {
      const double a = 0.5 * orient2d(poly[t[0]], poly[t[1]], poly[t[2]]);
      CHECK(a > 0);
      area += a;
    }
    CHECK(area == doctest::Approx(polygon_area(poly)).epsilon(1e-12));
    // Every interior edge is locally Delaunay.
    for (const auto& t : tris) {
      for (const auto& u : tris) {
        for (int j = 0; j < 3; ++j) {
          for (int k = 0; k < 3; ++k) {
            if (t[j] != u[(k + 1) % 3] || t[(j + 1) % 3] != u[k]) continue;
            const int opposite = u[(k + 2) % 3];
            CHECK(incircle(poly[t[0]], poly[t[1]], poly[t[2]], poly[opposite]) <= 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("a triangle straddling a cell edge is split into three fragments") {
  const std::array<Vec2, 3> left{Vec2{0, 0}, Vec2{1, 0}, Vec2{0, 1}};
  const std::array<Vec2, 3> right{Vec2{1, 0}, Vec2{1, 1}, Vec2{0, 1}};
  const std::vector<std::array<Vec2, 3>> cells{left, right};
  // One corner on the far side of the shared edge, two on the near side.
  const std::array<Vec2, 3> tri{Vec2{0.2, 0.2}, Vec2{0.9, 0.6}, Vec2{0.3, 0.5}};
  const auto pieces = split_flipped(tri, cells);
  REQUIRE(pieces.size() == 2);
  int triangles = 0;
  double area = 0;
  for (const auto& p : pieces) {
    triangles += static_cast<int>(p.polygon.size()) - 2;
    area += polygon_area(p.polygon);
    for (const Vec2& q : p.polygon) {
      const auto& c = cells[p.cell];
      const auto b = barycentric(q, c[0], c[1], c[2]);
      CHECK(std::min({b[0], b[1], b[2]}) >= -1e-12);
    }
  }
  CHECK(triangles == 3);
  CHECK(area == doctest::Approx(0.5 * orient2d(tri[0], tri[1], tri[2])).epsilon(1e-12));

  const std::array<Vec2, 3> inside{Vec2{0.1, 0.1}, Vec2{0.3, 0.1}, Vec2{0.1, 0.3}};
  const auto one = split_flipped(inside, cells);
  REQUIRE(one.size() == 1);
  CHECK(one[0].cell == 0);
  CHECK(one[0].polygon.size() == 3);
}

TEST_CASE("removing a flat valence-6 vertex keeps positions") {
  const Mesh mesh = hexagon_cap();
  DecimationState s(mesh);
  REQUIRE(s.remove_vertex(0));
  CHECK(s.face_count() == 10);
  CHECK(s.vertex_count() == 7);
  check_fragments(s);
  int new_faces = 0;
  for (int slot = 0; slot < s.slot_count(); ++slot) {
    if (!s.face_alive(slot)) continue;
    const Face& f = s.slot_face(slot);
    if (std::find(f.begin(), f.end(), 7) != f.end()) continue;
    ++new_faces;
    for (const Fragment& fr : s.fragments(slot)) {
      for (int k = 0; k < 3; ++k) {
        const Vec3 host = on_face(mesh, f, fr.host_bary[k]);
        const Vec3 orig = on_face(mesh, mesh.face(fr.original_face), fr.orig_bary[k]);
        CHECK(norm(host - orig) < 1e-9);
      }
    }
  }
  CHECK(new_faces == 4);
  const SurfacePoint& img = s.vertex_image(0);
  CHECK(norm(on_face(mesh, s.slot_face(img.face), img.bary)) < 1e-9);
}

TEST_CASE("cone apex flattening is positively oriented") {
  DecimationOptions opt;
  opt.keep_flattenings = true;
  const Mesh oct = shapes::octahedron();
  DecimationState s(oct, opt);
  REQUIRE(s.remove_vertex(0));
  REQUIRE(s.flattenings().size() == 1);
  const Flattening& fl = s.flattenings()[0];
  CHECK(fl.total_angle < 2 * std::numbers::pi);
  const int n = static_cast<int>(fl.ring.size());
  for (int i = 0; i < n; ++i) CHECK(orient2d({0, 0}, fl.ring_uv[i], fl.ring_uv[(i + 1) % n]) > 0);
  CHECK(static_cast<int>(fl.triangles.size()) == n - 2);
  for (const auto& t : fl.triangles) CHECK(orient2d(fl.ring_uv[t[0]], fl.ring_uv[t[1]], fl.ring_uv[t[2]]) > 0);
  check_fragments(s);
}

TEST_CASE("removals that would duplicate an edge are rejected") {
  // The short diagonal a-c already exists underneath.
  const Mesh pinched_mesh = pinched_quad(0.3, 1.0);
  DecimationState pinched(pinched_mesh);
  CHECK_FALSE(pinched.remove_vertex(0));
  CHECK(pinched.face_count() == 6);
  CHECK(pinched.vertex_alive(0));
  // With the other diagonal preferred the removal leaves a tetrahedron.
  const Mesh open_mesh = pinched_quad(1.0, 0.3);
  DecimationState open(open_mesh);
  CHECK(open.remove_vertex(0));
  CHECK(open.face_count() == 4);
  // A tetrahedron cannot lose a vertex.
  const Mesh tet_mesh = shapes::tetrahedron();
  DecimationState tet(tet_mesh);
  for (int v = 0; v < 4; ++v) CHECK_FALSE(tet.remove_vertex(v));
}

TEST_CASE("independent sets") {
  const Mesh tet = shapes::tetrahedron();
  CHECK(max_independent_set(tet, 1).size() <= 1);
  const Mesh ico = shapes::icosahedron();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto set = max_independent_set(ico, seed);
    CHECK(!set.empty());
    CHECK(set.size() <= 3);
    const std::set<int> chosen(set.begin(), set.end());
    for (const auto& [a, b] : unique_edges(ico)) CHECK_FALSE((chosen.count(a) && chosen.count(b)));
    CHECK(set == max_independent_set(ico, seed));
  }
  const auto guarded = max_independent_set(ico, 0, {0, 1, 2});
  for (int v : guarded) CHECK(v > 2);
}

TEST_CASE("parameterization stays valid after every removal") {
  const Mesh mesh = shapes::icosphere(2);
  DecimationState s(mesh);
  for (int round = 0; round < 4; ++round) {
    const Mesh current = s.current_mesh();
    std::vector<int> alive;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if (s.vertex_alive(v)) alive.push_back(v);
    }
    for (int local : max_independent_set(current, round)) {
      s.remove_vertex(alive[local]);
      check_fragments(s);
    }
  }
  CHECK(s.face_count() < mesh.face_count() / 2);
  // Fragments of each original face cover it exactly once.
  std::vector<double> covered(mesh.face_count(), 0.0);
  for (int slot = 0; slot < s.slot_count(); ++slot) {
    if (!s.face_alive(slot)) continue;
    for (const Fragment& fr : s.fragments(slot)) {
      CHECK(bary_area(fr.host_bary) > 0);
      covered[fr.original_face] += bary_area(fr.orig_bary);
    }
  }
  for (double c : covered) CHECK(c == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("decimating a 1280-face sphere to a 48-face base") {
  const Mesh mesh = shapes::icosphere(3);
  REQUIRE(mesh.face_count() == 1280);
  DecimationOptions opt;
  opt.seed = 3;
  const auto r = decimate_to_base(mesh, 48, opt);
  CHECK(r.reached_target);
  CHECK(r.base.face_count() >= 48);
  CHECK(r.base.face_count() < 96);
  CHECK(euler(r.base) == euler(mesh));
  REQUIRE(r.param.vertices.size() == static_cast<std::size_t>(mesh.vertex_count()));
  std::size_t hosted = 0;
  for (const auto& h : r.param.hosted) hosted += h.size();
  CHECK(hosted == r.param.vertices.size());
  for (const SurfacePoint& p : r.param.vertices) {
    CHECK(p.face >= 0);
    CHECK(p.face < r.base.face_count());
    CHECK(valid_bary(p.bary));
  }
  for (int v = 0; v < r.base.vertex_count(); ++v) {
    CHECK(r.base.position(v) == mesh.position(r.base_to_original[v]));
  }
  const auto j = nlohmann::json::parse(param_map_json(r.param));
  CHECK(j["vertices"].size() == r.param.vertices.size());
  CHECK(j["base_faces"] == r.base.face_count());
}

TEST_CASE("different seeds give different valid bases") {
  const Mesh mesh = shapes::icosphere(3);
  DecimationOptions a, b;
  a.seed = 1;
  b.seed = 2;
  const auto ra = decimate_to_base(mesh, 48, a);
  const auto rb = decimate_to_base(mesh, 48, b);
  CHECK(ra.reached_target);
  CHECK(rb.reached_target);
  CHECK(ra.base_to_original != rb.base_to_original);
  CHECK(decimate_to_base(mesh, 48, a).base_to_original == ra.base_to_original);
}

TEST_CASE("edge-collapse variant") {
  const Mesh mesh = shapes::icosphere(3);
  DecimationOptions opt;
  opt.method = DecimationMethod::Liu;
  const auto r = decimate_to_base(mesh, 48, opt);
  CHECK(r.base.face_count() < 2 * 48);
  CHECK(euler(r.base) == euler(mesh));
  CHECK(r.message.find("liu") != std::string::npos);
  CHECK(parse_method("maps") == DecimationMethod::Maps);
  CHECK_THROWS_AS(parse_method("qem"), Error);
}

TEST_CASE("high genus cannot reach a 48-face base") {
  const Mesh mesh = shapes::holed_plate(7);
  REQUIRE(validate_closed_manifold(mesh).genus == 7);
  const auto r = decimate_to_base(mesh, 48, {});
  CHECK_FALSE(r.reached_target);
  CHECK(r.base.face_count() > 48);
  CHECK(validate_closed_manifold(r.base).genus == 7);
  CHECK(r.message.find("not reachable") != std::string::npos);
}

TEST_CASE("decimation preconditions") {
  CHECK_THROWS_AS(decimate_to_base(shapes::icosphere(1), 3, {}), Error);
  Mesh open(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, std::vector<Face>{{0, 1, 2}});
  CHECK_THROWS_AS(decimate_to_base(open, 4, {}), TopologyError);
}

TEST_CASE("remeshed vertices lie on the original surface") {
  const Mesh mesh = shapes::icosphere(3);
  DecimationOptions opt;
  opt.seed = 3;
  const auto r = remesh(mesh, 48, 4, opt);
  REQUIRE(r.pyramid.depth() == 4);
  CHECK(r.pyramid.base().face_count() == 48);
  const Mesh& fine = r.pyramid.finest();
  CHECK(fine.face_count() == 12288);
  const double tol = 1e-6 * bounding_box_diagonal(mesh);
  REQUIRE(r.finest_sources.size() == static_cast<std::size_t>(fine.vertex_count()));
  for (int v = 0; v < fine.vertex_count(); ++v) {
    const SurfacePoint& src = r.finest_sources[v];
    CHECK(valid_bary(src.bary));
    CHECK(norm(on_face(mesh, mesh.face(src.face), src.bary) - fine.position(v)) < 1e-9);
    if (v % 7 == 0) CHECK(oracle::surface_distance(mesh, fine.position(v)) < tol);
  }
  // Coarser levels share the finest positions.
  for (int l = 0; l < r.pyramid.depth(); ++l) {
    const Mesh& m = r.pyramid.level(l);
    for (int v = 0; v < m.vertex_count(); ++v) CHECK(m.position(v) == fine.position(v));
  }
  Mesh topo = fine;
  for (int l = 0; l < 4; ++l) {
    auto c = detect_subdivision_connectivity(topo);
    REQUIRE(c);
    topo = c->coarse;
  }
  CHECK(topo.face_count() == 48);
}

TEST_CASE("depth 0 remesh returns the base") {
  const auto r = remesh(shapes::icosphere(2), 48, 0, {});
  CHECK(r.pyramid.depth() == 0);
  CHECK(r.pyramid.finest().face_count() == r.pyramid.base().face_count());
  CHECK(r.pyramid.base().face_count() < 96);
  CHECK_THROWS_AS(remesh(shapes::icosphere(2), 48, -1, {}), Error);
}

TEST_CASE("label transfer") {
  const Mesh ico = shapes::icosphere(2);
  std::vector<int> ids(ico.face_count());
  for (int f = 0; f < ico.face_count(); ++f) ids[f] = f;
  CHECK(transfer_labels(ico, ids, ico) == ids);
  CHECK_THROWS_AS(transfer_labels(ico, std::vector<int>(3, 0), ico), ShapeError);

  // Octant labels on a 10k-face sphere survive a round trip through another sphere.
  const Mesh a = shapes::cube_sphere(29, 1.0);
  const Mesh b = shapes::icosphere(5);
  auto octant = [](const Vec3& c) { return (c.x > 0) + 2 * (c.y > 0) + 4 * (c.z > 0); };
  std::vector<int> labels(a.face_count());
  for (int f = 0; f < a.face_count(); ++f) labels[f] = octant(a.centroid(f));
  const auto there = transfer_labels(a, labels, b);
  const auto back = transfer_labels(b, there, a);
  int same = 0;
  for (int f = 0; f < a.face_count(); ++f) same += back[f] == labels[f];
  CHECK(same >= 0.99 * a.face_count());
}

TEST_CASE("hemisphere labels on a remeshed sphere differ only near the equator") {
  const Mesh mesh = shapes::icosphere(3);
  const auto r = remesh(mesh, 48, 3, {});
  const Mesh& fine = r.pyramid.finest();
  std::vector<int> labels(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) labels[f] = mesh.centroid(f).z > 0;
  const auto out = transfer_labels(mesh, labels, fine);
  std::vector<double> edges;
  for (const auto& [u, v] : unique_edges(fine)) edges.push_back(norm(fine.position(u) - fine.position(v)));
  std::nth_element(edges.begin(), edges.begin() + edges.size() / 2, edges.end());
  const double band = edges[edges.size() / 2];
  for (int f = 0; f < fine.face_count(); ++f) {
    const double z = fine.centroid(f).z;
    if (out[f] != (z > 0)) CHECK(std::abs(z) <= band);
  }
}
