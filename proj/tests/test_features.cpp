#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "subdivnet/error.h"
#include "subdivnet/features.h"
#include "subdivnet/shapes.h"

using namespace subdivnet;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Mesh> corpus() {
  return {shapes::tetrahedron(), shapes::octahedron(), shapes::icosahedron(), shapes::icosphere(2),
          shapes::cube_grid(3, 4), shapes::torus(12, 8), shapes::holed_plate(2, 2),
          shapes::cube_sphere(4, 1.0, 2)};
}

/// Rotation matrix from axis-angle (Rodrigues).
std::array<Vec3, 3> rotation(Vec3 axis, double angle) {
  axis = normalized(axis);
  const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  const double x = axis.x, y = axis.y, z = axis.z;
  return {Vec3{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
          Vec3{t * x * y + s * z, t * y * y + c, t * y * z - s * x},
          Vec3{t * x * z - s * y, t * y * z + s * x, t * z * z + c}};
}

Vec3 rotate(const std::array<Vec3, 3>& r, const Vec3& p) { return {dot(r[0], p), dot(r[1], p), dot(r[2], p)}; }

Mesh centered_cube() {
  const Mesh cube = shapes::cube_grid(2);
  std::vector<Vec3> p(cube.vertices());
  for (Vec3& v : p) v = v - Vec3{1, 1, 1};
  return cube.with_positions(std::move(p));
}

}  // namespace

TEST_CASE("unit right triangles of a cube") {
  const Mesh cube = shapes::cube_grid(1);
  const auto feats = compute_features(cube);
  REQUIRE(feats.values.cols() == 13);
  for (int f = 0; f < cube.face_count(); ++f) {
    const auto row = feats.values.row(f);
    CHECK(row[0] == doctest::Approx(0.5).epsilon(1e-15));
    std::vector<double> angles{row[1], row[2], row[3]};
    std::sort(angles.begin(), angles.end());
    CHECK(angles[0] == doctest::Approx(kPi / 4).epsilon(1e-12));
    CHECK(angles[1] == doctest::Approx(kPi / 4).epsilon(1e-12));
    CHECK(angles[2] == doctest::Approx(kPi / 2).epsilon(1e-12));
    int axis_hits = 0;
    for (int k = 10; k < 13; ++k) axis_hits += std::abs(std::abs(row[k]) - 1) < 1e-12;
    CHECK(axis_hits == 1);
    const Vec3 c = cube.centroid(f);
    CHECK(row[7] == c.x);
    CHECK(row[8] == c.y);
    CHECK(row[9] == c.z);
  }
}

TEST_CASE("icosahedron faces have symmetric features") {
  const auto feats = compute_features(shapes::icosahedron());
  for (int f = 0; f < feats.values.rows(); ++f) {
    const auto row = feats.values.row(f);
    for (int k = 1; k < 4; ++k) CHECK(row[k] == doctest::Approx(kPi / 3).epsilon(1e-12));
    CHECK(row[5] == doctest::Approx(row[4]).epsilon(1e-12));
    CHECK(row[6] == doctest::Approx(row[4]).epsilon(1e-12));
  }
}

TEST_CASE("curvature terms approach 1 under refinement") {
  double previous = -2;
  for (int level = 0; level <= 3; ++level) {
    const auto feats = compute_features(shapes::icosphere(level));
    double lowest = 2;
    for (int f = 0; f < feats.values.rows(); ++f) {
      for (int k = 4; k < 7; ++k) lowest = std::min(lowest, feats.values(f, k));
    }
    CHECK(lowest > previous);
    CHECK(lowest <= 1);
    previous = lowest;
  }
  CHECK(previous > 0.99);
}

TEST_CASE("feature invariants hold on the corpus") {
  for (const Mesh& mesh : corpus()) {
    const auto feats = compute_features(mesh);
    for (int f = 0; f < mesh.face_count(); ++f) {
      if (feats.degenerate[f]) continue;
      const auto row = feats.values.row(f);
      for (int k = 1; k < 4; ++k) {
        CHECK(row[k] > 0);
        CHECK(row[k] < kPi);
      }
      CHECK(std::abs(row[1] + row[2] + row[3] - kPi) < 1e-6);
      CHECK(std::abs(std::hypot(row[10], row[11], row[12]) - 1) < 1e-9);
      for (int k = 4; k < 7; ++k) {
        CHECK(row[k] >= -1);
        CHECK(row[k] <= 1);
      }
    }
  }
}

TEST_CASE("shape values are rigid invariants and pose values covariant") {
  const Mesh mesh = shapes::torus(10, 7);
  const auto base = compute_features(mesh);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto r = rotation({u(rng), u(rng), u(rng)}, 3 * u(rng));
    const Vec3 shift{5 * u(rng), 5 * u(rng), 5 * u(rng)};
    std::vector<Vec3> p(mesh.vertices());
    for (Vec3& v : p) v = rotate(r, v) + shift;
    const auto moved = compute_features(mesh.with_positions(std::move(p)));
    for (int f = 0; f < mesh.face_count(); ++f) {
      for (int k = 0; k < kShapeChannels; ++k) CHECK(std::abs(moved.values(f, k) - base.values(f, k)) < 1e-9);
      const Vec3 c{base.values(f, 7), base.values(f, 8), base.values(f, 9)};
      const Vec3 n{base.values(f, 10), base.values(f, 11), base.values(f, 12)};
      const Vec3 c2 = rotate(r, c) + shift, n2 = rotate(r, n);
      for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(moved.values(f, 7 + k) - c2[k]) < 1e-9);
        CHECK(std::abs(moved.values(f, 10 + k) - n2[k]) < 1e-9);
      }
    }
  }
}

TEST_CASE("features do not depend on face order") {
  const Mesh mesh = shapes::cube_sphere(5, 1.0, 9);
  std::vector<int> perm(mesh.face_count());
  for (int i = 0; i < mesh.face_count(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<Face> faces;
  for (int f : perm) faces.push_back(mesh.face(f));
  const Mesh shuffled(mesh.vertices(), std::move(faces));
  const auto a = compute_features(mesh);
  const auto b = compute_features(shuffled);
  for (int i = 0; i < mesh.face_count(); ++i) {
    for (int k = 0; k < kFeatureChannels; ++k) CHECK(b.values(i, k) == a.values(perm[i], k));
  }
  CHECK(compute_features(mesh).values.data() == a.values.data());
}

TEST_CASE("degenerate faces get substitute angles and a neighbor normal") {
  const Mesh mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.5, 0, 0}}, {{0, 1, 2}, {1, 0, 3}});
  const auto feats = compute_features(mesh);
  CHECK_FALSE(feats.degenerate[0]);
  CHECK(feats.degenerate[1]);
  for (int k = 1; k < 4; ++k) CHECK(feats.values(1, k) == doctest::Approx(kPi / 3));
  for (int k = 10; k < 13; ++k) CHECK(feats.values(1, k) == feats.values(0, k));
}

TEST_CASE("unit cube normalization") {
  const Mesh cube = shapes::cube_grid(1);
  std::vector<Vec3> p(cube.vertices());
  for (Vec3& v : p) v = 10.0 * v + Vec3{3, -7, 2};
  const Mesh n = normalize_unit_cube(cube.with_positions(p));
  for (int v = 0; v < n.vertex_count(); ++v) CHECK(norm(n.position(v) - cube.position(v)) < 1e-12);
  const Mesh again = normalize_unit_cube(n);
  for (int v = 0; v < n.vertex_count(); ++v) CHECK(norm(again.position(v) - n.position(v)) < 1e-12);

  for (Vec3& v : p) v = {4 * v.x, v.y, v.z};
  const auto [lo, hi] = bounding_box(normalize_unit_cube(cube.with_positions(p)));
  CHECK(lo.x == doctest::Approx(0));
  CHECK(hi.x == doctest::Approx(1));
  CHECK(hi.y - lo.y == doctest::Approx(0.25));
  CHECK(hi.z - lo.z == doctest::Approx(0.25));

  const Mesh point({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}, {});
  CHECK_THROWS_AS(normalize_unit_cube(point), Error);
}

TEST_CASE("augmentation") {
  const Mesh mesh = shapes::torus(8, 6);
  CHECK(augment(mesh, 17).vertices() == augment(mesh, 17).vertices());
  CHECK(augment(mesh, 17).vertices() != augment(mesh, 18).vertices());

  // Quarter turns map a centered cube onto itself.
  const Mesh cube = centered_cube();
  auto key = [](const Vec3& v) { return std::array<double, 3>{v.x, v.y, v.z}; };
  std::set<std::array<double, 3>> original;
  for (const Vec3& v : cube.vertices()) original.insert(key(v));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Augmentation a = draw_augmentation(seed);
    a.scale = {1, 1, 1};
    std::set<std::array<double, 3>> turned;
    const Mesh moved = apply_augmentation(cube, a);
    for (const Vec3& v : moved.vertices()) turned.insert(key(v));
    CHECK(turned == original);
  }

  std::vector<double> scales;
  for (std::uint64_t seed = 0; scales.size() < 10000; ++seed) {
    const Augmentation a = draw_augmentation(seed);
    for (int k = 0; k < 3; ++k) {
      CHECK(a.scale[k] >= 0.7);
      CHECK(a.scale[k] <= 1.3);
      CHECK(a.quarter_turns[k] >= 0);
      CHECK(a.quarter_turns[k] <= 3);
      scales.push_back(a.scale[k]);
    }
  }
  double mean = 0, var = 0;
  for (double s : scales) mean += s;
  mean /= scales.size();
  for (double s : scales) var += (s - mean) * (s - mean);
  const double sigma = std::sqrt(var / (scales.size() - 1));
  CHECK(std::abs(mean - 1) < 0.01);
  CHECK(std::abs(sigma - 0.1) < 0.01);
}

TEST_CASE("feature file layout") {
  const auto feats = compute_features(shapes::octahedron());
  std::stringstream buf;
  write_features(buf, feats.values);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == 4 + 8 + 4 + 8 * 13 * 4);
  CHECK(bytes.substr(0, 4) == "SDVF");
  CHECK(static_cast<unsigned char>(bytes[4]) == 8);
  CHECK(static_cast<unsigned char>(bytes[12]) == 13);
  const FeatureTensor back = read_features(buf);
  REQUIRE(back.same_shape(feats.values));
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.data()[i] == static_cast<double>(static_cast<float>(feats.values.data()[i])));
  }
  std::stringstream bad("SDVX");
  CHECK_THROWS_AS(read_features(bad), ParseError);
  std::stringstream truncated(bytes.substr(0, 30));
  CHECK_THROWS_AS(read_features(truncated), ParseError);
}
