#include "subdivnet/features.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>

#include "subdivnet/error.h"
#include "subdivnet/parallel.h"

namespace subdivnet {

namespace {

bool vec_less(const Vec3& a, const Vec3& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

/// Exact quarter-turn rotation of p about `axis` (0 = x, 1 = y, 2 = z).
Vec3 quarter_turn(Vec3 p, int axis, int turns) {
  const int i = (axis + 1) % 3, j = (axis + 2) % 3;
  for (int t = 0; t < ((turns % 4) + 4) % 4; ++t) {
    const double a = p[i], b = p[j];
    p[i] = -b;
    p[j] = a;
  }
  return p;
}

}  // namespace

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  const auto incident = vertex_face_lists(mesh);
  std::vector<Vec3> out(mesh.vertex_count());
  parallel_for(0, mesh.vertex_count(), [&](int v) {
    std::vector<Vec3> terms;
    terms.reserve(incident[v].size());
    for (int f : incident[v]) terms.push_back(mesh.area_normal(f));
    // Summing in value order makes the result independent of face numbering.
    std::sort(terms.begin(), terms.end(), vec_less);
    Vec3 n{};
    for (const Vec3& t : terms) n += t;
    const double len = norm(n);
    out[v] = len > 0 ? n / len : Vec3{};
  });
  return out;
}

FaceFeatures compute_features(const Mesh& mesh) {
  const int nf = mesh.face_count();
  FaceFeatures out;
  out.values = FeatureTensor(nf, kFeatureChannels);
  out.degenerate = degenerate_faces(mesh, 1e-12);
  const auto vn = vertex_normals(mesh);

  // Degenerate faces borrow the normal of the nearest non-degenerate face.
  std::vector<Vec3> normal(nf);
  for (int f = 0; f < nf; ++f) {
    if (!out.degenerate[f]) normal[f] = normalized(mesh.area_normal(f));
  }
  std::vector<bool> seen(nf, false);
  for (int f = 0; f < nf; ++f) {
    if (!out.degenerate[f]) continue;
    normal[f] = {0, 0, 1};
    std::vector<int> visited{f};
    seen[f] = true;
    for (std::size_t i = 0; i < visited.size(); ++i) {
      const int g = visited[i];
      if (!out.degenerate[g]) {
        normal[f] = normal[g];
        break;
      }
      for (int h : mesh.neighbors(g)) {
        if (h != kNoFace && !seen[h]) {
          seen[h] = true;
          visited.push_back(h);
        }
      }
    }
    for (int g : visited) seen[g] = false;
  }

  parallel_for(0, nf, [&](int f) {
    const Face& t = mesh.face(f);
    auto row = out.values.row(f);
    row[0] = mesh.area(f);
    for (int k = 0; k < 3; ++k) {
      row[1 + k] = out.degenerate[f] ? std::numbers::pi / 3
                                      : angle_between(mesh.position(t[k]), mesh.position(t[(k + 1) % 3]),
                                                      mesh.position(t[(k + 2) % 3]));
      row[4 + k] = std::clamp(dot(normal[f], vn[t[k]]), -1.0, 1.0);
    }
    const Vec3 c = mesh.centroid(f);
    for (int k = 0; k < 3; ++k) {
      row[7 + k] = c[k];
      row[10 + k] = normal[f][k];
    }
  });
  return out;
}

Mesh normalize_unit_cube(const Mesh& mesh) {
  if (mesh.vertex_count() == 0) throw Error("cannot normalize an empty mesh");
  const auto [lo, hi] = bounding_box(mesh);
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(extent > 0)) throw Error("cannot normalize a mesh with zero extent");
  std::vector<Vec3> p(mesh.vertices());
  for (Vec3& v : p) v = (v - lo) / extent;
  return mesh.with_positions(std::move(p));
}

Augmentation draw_augmentation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> scale(1.0, 0.1);
  std::uniform_int_distribution<int> turns(0, 3);
  Augmentation a;
  for (int k = 0; k < 3; ++k) a.scale[k] = std::clamp(scale(rng), 0.7, 1.3);
  for (int k = 0; k < 3; ++k) a.quarter_turns[k] = turns(rng);
  return a;
}

Mesh apply_augmentation(const Mesh& mesh, const Augmentation& aug) {
  std::vector<Vec3> p(mesh.vertices());
  for (Vec3& v : p) {
    v = {v.x * aug.scale.x, v.y * aug.scale.y, v.z * aug.scale.z};
    for (int axis = 0; axis < 3; ++axis) v = quarter_turn(v, axis, aug.quarter_turns[axis]);
  }
  return mesh.with_positions(std::move(p));
}

Mesh augment(const Mesh& mesh, std::uint64_t seed) { return apply_augmentation(mesh, draw_augmentation(seed)); }

void write_features(std::ostream& out, const FeatureTensor& features) {
  auto put = [&](std::uint64_t value, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(buf, bytes);
  };
  out.write("SDVF", 4);
  put(static_cast<std::uint64_t>(features.rows()), 8);
  put(static_cast<std::uint32_t>(features.cols()), 4);
  for (double x : features.data()) put(std::bit_cast<std::uint32_t>(static_cast<float>(x)), 4);
}

FeatureTensor read_features(std::istream& in) {
  auto get = [&](int bytes) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), bytes);
    if (!in) throw ParseError("truncated feature file", 0);
    std::uint64_t value = 0;
    for (int i = 0; i < bytes; ++i) value |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return value;
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SDVF") throw ParseError("not a feature file", 0);
  const auto rows = get(8);
  const auto cols = get(4);
  if (rows > (1u << 30) || cols > (1u << 16)) throw ParseError("implausible feature dimensions", 0);
  FeatureTensor t(static_cast<int>(rows), static_cast<int>(cols));
  for (double& x : t.data()) x = std::bit_cast<float>(static_cast<std::uint32_t>(get(4)));
  return t;
}

void save_features(const FeatureTensor& features, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_features(out, features);
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureTensor load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_features(in);
}

}  // namespace subdivnet
