#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <json.hpp>
#include <set>
#include <sstream>

#include "oracles.h"
#include "subdivnet/error.h"
#include "subdivnet/patterns.h"
#include "subdivnet/shapes.h"

using namespace subdivnet;

namespace {

Mesh reversed(const Mesh& m) {
  std::vector<Face> f = m.faces();
  for (Face& t : f) std::swap(t[1], t[2]);
  return Mesh(m.vertices(), f);
}

std::vector<Mesh> corpus() {
  return {loop_split(shapes::icosahedron()).fine, shapes::icosphere(2),
          loop_split(shapes::octahedron()).fine,  loop_split(loop_split(shapes::tetrahedron()).fine).fine,
          shapes::cube_grid(4),                   shapes::torus(12, 9),
          loop_split(shapes::holed_plate(2)).fine};
}

/// True if every face within distance `radius` of f touches only valence-6 vertices.
bool regular_around(const Mesh& m, const std::vector<int>& dist, const std::vector<int>& val, int radius) {
  for (int g = 0; g < m.face_count(); ++g) {
    if (dist[g] < 0 || dist[g] > radius) continue;
    for (int v : m.face(g)) {
      if (val[v] != 6) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("ring_order is the neighbor list and reverses with the winding") {
  const Mesh tet = shapes::tetrahedron();
  const Mesh rev = reversed(tet);
  for (int f = 0; f < 4; ++f) {
    const auto a = ring_order(tet, f);
    const auto b = ring_order(rev, f);
    // Same start (opposite vertex 0), opposite direction.
    CHECK(b[0] == a[0]);
    CHECK(b[1] == a[2]);
    CHECK(b[2] == a[1]);
    CHECK(ring_order(tet, f) == a);
  }
  CHECK_THROWS_AS(ring_order(tet, 4), ShapeError);
}

TEST_CASE("ring_order is a permutation of the 1-ring and turns counterclockwise") {
  const Mesh m = loop_split(shapes::icosahedron()).fine;
  const auto graph = oracle::face_graph(m);
  for (int f = 0; f < m.face_count(); ++f) {
    auto r = ring_order(m, f);
    auto sorted = std::vector<int>(r.begin(), r.end());
    std::sort(sorted.begin(), sorted.end());
    auto expected = graph[f];
    std::sort(expected.begin(), expected.end());
    CHECK(sorted == expected);
    // Consecutive neighbor centroids sweep positively around the outward face normal.
    const Vec3 c = m.centroid(f);
    const Vec3 n = m.area_normal(f);
    for (int j = 0; j < 3; ++j) {
      const Vec3 a = m.centroid(r[j]) - c;
      const Vec3 b = m.centroid(r[(j + 1) % 3]) - c;
      CHECK(dot(cross(a, b), n) > 0);
    }
  }
}

TEST_CASE("pattern lengths") {
  CHECK(pattern_length(3) == 3);
  CHECK(pattern_length(5) == 9);
  CHECK(pattern_length(7) == 21);
  CHECK_THROWS(pattern_length(4));
  const Mesh m = shapes::icosphere(2);
  CHECK_THROWS_AS(kernel_pattern(m, 0, 9), Error);
  CHECK_THROWS_AS(kernel_pattern(m, 0, 4), Error);
}

TEST_CASE("k=3 pattern equals the 1-ring; k=5 at regular faces covers N1 and N2") {
  const Mesh m = shapes::icosphere(2);
  const auto graph = oracle::face_graph(m);
  const auto val = oracle::valences(m);
  int regular = 0;
  for (int f = 0; f < m.face_count(); ++f) {
    const auto p3 = kernel_pattern(m, f, 3);
    CHECK(std::set<int>(p3.begin(), p3.end()) == std::set<int>(graph[f].begin(), graph[f].end()));
    const auto dist = oracle::distances_from(graph, f);
    bool all6 = true;
    for (int v : m.face(f)) all6 = all6 && val[v] == 6;
    if (!all6) continue;
    ++regular;
    const auto p5 = kernel_pattern(m, f, 5);
    std::set<int> expected;
    for (int g = 0; g < m.face_count(); ++g) {
      if (dist[g] == 1 || dist[g] == 2) expected.insert(g);
    }
    CHECK(expected.size() == 9);
    CHECK(std::set<int>(p5.begin(), p5.end()) == expected);
  }
  CHECK(regular > 0);
}

TEST_CASE("k=5 at a valence-4 vertex repeats a face") {
  const Mesh m = loop_split(shapes::octahedron()).fine;
  const auto val = oracle::valences(m);
  int checked = 0;
  for (int f = 0; f < m.face_count(); ++f) {
    bool touches4 = false;
    for (int v : m.face(f)) touches4 = touches4 || val[v] == 4;
    if (!touches4) continue;
    const auto p = kernel_pattern(m, f, 5);
    CHECK(p.size() == 9);
    CHECK(std::set<int>(p.begin(), p.end()).size() < 9);
    ++checked;
  }
  CHECK(checked == 24);
}

TEST_CASE("k=5 patterns read as a walk around the center face") {
  // In-order serialization of the tree must read as a walk around f.
  const Mesh m = shapes::icosphere(3);
  const auto graph = oracle::face_graph(m);
  for (int f = 0; f < m.face_count(); f += 13) {
    const auto p = kernel_pattern(m, f, 5);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const int a = p[i];
      const int b = p[(i + 1) % p.size()];
      const bool adjacent = std::count(graph[a].begin(), graph[a].end(), b) == 1;
      // Between two trees the walk pivots around a vertex of f: the last face of one
      // tree and the first of the next share only that vertex.
      if (i % 3 != 2) CHECK(adjacent);
    }
  }
}

TEST_CASE("pattern size law and set inclusion over a corpus") {
  for (const Mesh& m : corpus()) {
    const auto graph = oracle::face_graph(m);
    for (int f = 0; f < m.face_count(); ++f) {
      const auto dist = oracle::distances_from(graph, f);
      for (int k : {3, 5, 7}) {
        const auto p = kernel_pattern(m, f, k);
        REQUIRE(static_cast<int>(p.size()) == pattern_length(k));
        for (int g : p) REQUIRE((dist[g] >= 0 && dist[g] <= (k - 1) / 2));
      }
    }
  }
}

TEST_CASE("k=5 duplicates only occur next to vertices of valence at most 4") {
  for (const Mesh& m : corpus()) {
    const auto val = oracle::valences(m);
    for (int f = 0; f < m.face_count(); ++f) {
      const auto p = kernel_pattern(m, f, 5);
      std::multiset<int> seen(p.begin(), p.end());
      for (int g : p) {
        if (seen.count(g) < 2) continue;
        bool low = false;
        for (int v : m.face(g)) low = low || val[v] <= 4;
        CHECK(low);
      }
    }
  }
}

TEST_CASE("dilated pattern: d=1 is the ring, larger d lands at distance d on regular regions") {
  const Mesh m = loop_split(shapes::icosphere(2)).fine;
  const auto graph = oracle::face_graph(m);
  const auto val = oracle::valences(m);
  int regular_faces = 0;
  for (int f = 0; f < m.face_count(); ++f) {
    CHECK(dilated_pattern(m, f, 1) == ring_order(m, f));
    CHECK(dilated_pattern(m, f, 1, Parity::ZagFirst) == ring_order(m, f));
    const auto dist = oracle::distances_from(graph, f);
    for (int d : {2, 3, 4}) {
      if (!regular_around(m, dist, val, d)) continue;
      ++regular_faces;
      for (Parity parity : {Parity::ZigFirst, Parity::ZagFirst}) {
        for (int g : dilated_pattern(m, f, d, parity)) CHECK(dist[g] == d);
      }
    }
  }
  CHECK(regular_faces > 100);
}

TEST_CASE("zag-first equals zig-first on the mirrored mesh") {
  for (const Mesh& m : corpus()) {
    const Mesh mirror = reversed(m);
    for (int f = 0; f < m.face_count(); f += 3) {
      for (int d : {2, 3}) {
        const auto zig = dilated_pattern(m, f, d, Parity::ZigFirst);
        const auto zag = dilated_pattern(mirror, f, d, Parity::ZagFirst);
        CHECK(zag == std::array<int, 3>{zig[0], zig[2], zig[1]});
      }
    }
  }
}

TEST_CASE("zig and zag patterns differ on a flat regular patch") {
  const Mesh m = shapes::cube_grid(8);
  const auto graph = oracle::face_graph(m);
  const auto val = oracle::valences(m);
  int checked = 0;
  for (int f = 0; f < m.face_count(); ++f) {
    const auto dist = oracle::distances_from(graph, f);
    if (!regular_around(m, dist, val, 3)) continue;
    bool planar = true;
    for (int g = 0; g < m.face_count(); ++g) {
      if (dist[g] >= 0 && dist[g] <= 3) planar = planar && std::abs(dot(normalized(m.area_normal(g)), normalized(m.area_normal(f)))) > 1 - 1e-12;
    }
    if (!planar) continue;
    const auto a = dilated_pattern(m, f, 2, Parity::ZigFirst);
    const auto b = dilated_pattern(m, f, 2, Parity::ZagFirst);
    CHECK(std::set<int>(a.begin(), a.end()) != std::set<int>(b.begin(), b.end()));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("compile_index_buffer shapes and anchors") {
  Mesh m = shapes::cube_grid(2);
  for (int i = 0; i < 4; ++i) m = loop_split(m).fine;
  const auto pyr = build_pyramid(m, 4);
  const auto full = compile_index_buffer(pyr, 4, 3, 1, 1);
  CHECK(full.rows() == 12288);
  CHECK(full.indices.size() == 12288u * 3);
  CHECK(full.output_level() == 4);

  Mesh ico = loop_split(shapes::icosahedron()).fine;
  const auto ipyr = build_pyramid(ico, 1);
  const auto strided = compile_index_buffer(ipyr, 1, 3, 1, 2);
  CHECK(strided.rows() == 20);
  CHECK(strided.output_level() == 0);
  CHECK(strided.input_faces == 80);
  std::set<int> anchors(strided.anchors.begin(), strided.anchors.end());
  const auto& central = ipyr.face_map(1).central_child;
  CHECK(anchors == std::set<int>(central.begin(), central.end()));
  CHECK(anchors.size() == 20);
  for (int r = 0; r < strided.rows(); ++r) {
    CHECK(ipyr.face_map(1).parent_of[strided.anchors[r]] == r);
  }

  const auto k5 = compile_index_buffer(ipyr, 1, 5, 1, 1);
  CHECK(k5.row_length == 9);
  for (int32_t i : k5.indices) CHECK((i >= 0 && i < 80));

  CHECK(compile_index_buffer(ipyr, 1, 3, 2, 1, Parity::ZagFirst) ==
        compile_index_buffer(ipyr, 1, 3, 2, 1, Parity::ZagFirst));
  CHECK_THROWS_AS(compile_index_buffer(ipyr, 1, 5, 2, 1), Error);
  CHECK_THROWS_AS(compile_index_buffer(ipyr, 0, 3, 1, 2), Error);
  CHECK_THROWS_AS(compile_index_buffer(ipyr, 2, 3, 1, 1), Error);
  CHECK_THROWS_AS(compile_index_buffer(ipyr, 1, 3, 1, 3), Error);
}

TEST_CASE("index buffer binary and JSON export") {
  const auto pyr = build_pyramid(loop_split(shapes::octahedron()).fine, 1);
  const auto buf = compile_index_buffer(pyr, 1, 3, 2, 2, Parity::ZagFirst);
  std::stringstream bytes;
  write_index_buffer(bytes, buf);
  const std::string raw = bytes.str();
  CHECK(raw.substr(0, 4) == "SDVN");
  // Header: magic, 6 u32, u64 rows, u32 row length.
  CHECK(static_cast<unsigned char>(raw[4]) == 1);
  CHECK(static_cast<unsigned char>(raw[28]) == 8);  // rows, low byte first
  const std::size_t header = 4 + 6 * 4 + 8 + 4;
  CHECK(raw.size() == header + buf.indices.size() * 4 + buf.anchors.size() * 4 + 4);
  CHECK(read_index_buffer(bytes) == buf);

  std::stringstream bad("SDVX");
  CHECK_THROWS_AS(read_index_buffer(bad), ParseError);
  std::stringstream truncated(raw.substr(0, 20));
  CHECK_THROWS_AS(read_index_buffer(truncated), ParseError);

  const auto j = nlohmann::json::parse(index_buffer_json(buf));
  CHECK(j["rows"].size() == 8);
  CHECK(j["parity"] == "zag");
  CHECK(j["rows"][3].get<std::vector<int>>() == std::vector<int>(buf.row(3), buf.row(3) + 3));

  const auto path = std::filesystem::temp_directory_path() / "subdivnet_buffer.bin";
  save_index_buffer(buf, path);
  CHECK(load_index_buffer(path) == buf);
}
