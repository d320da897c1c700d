#include <cmath>
#include <numbers>
#include <random>

#include "subdivnet/error.h"
#include "subdivnet/obj_io.h"
#include "subdivnet/parallel.h"
#include "subdivnet/pipeline.h"
#include "subdivnet/shapes.h"

namespace subdivnet::pipeline {

namespace {

/// Uniformly random rotation matrix rows from a normalized Gaussian quaternion.
std::array<Vec3, 3> random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
  const double len = std::sqrt(w * w + x * x + y * y + z * z);
  w /= len, x /= len, y /= len, z /= len;
  return {Vec3{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
          Vec3{2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
          Vec3{2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

Mesh deform(const Mesh& mesh, std::mt19937_64& rng, bool rotate, double bump_amplitude = 0.03) {
  std::uniform_real_distribution<double> scale(0.75, 1.25), phase(0, 2 * std::numbers::pi);
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec3 s{scale(rng), scale(rng), scale(rng)};
  std::array<Vec3, 2> dir;
  std::array<double, 2> ph;
  for (int k = 0; k < 2; ++k) {
    dir[k] = normalized(Vec3{n(rng), n(rng), n(rng)});
    ph[k] = phase(rng);
  }
  const auto r = random_rotation(rng);
  std::vector<Vec3> p(mesh.vertices());
  for (Vec3& v : p) {
    const double len = norm(v);
    if (len > 0) {
      const Vec3 u = v / len;
      const double bump = bump_amplitude * (std::sin(3 * dot(dir[0], u) + ph[0]) + std::sin(5 * dot(dir[1], u) + ph[1]));
      v = v * (1 + bump);
    }
    v = {v.x * s.x, v.y * s.y, v.z * s.z};
    if (rotate) v = {dot(r[0], v), dot(r[1], v), dot(r[2], v)};
  }
  return mesh.with_positions(std::move(p));
}

}  // namespace

Mesh synth_shape(int shape_class, int raw_faces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = std::max(2, static_cast<int>(std::lround(std::sqrt(raw_faces / 12.0))));
  switch (shape_class) {
    case 0:
      return deform(shapes::cube_sphere(n, 1.0, seed), rng, true);
    case 1: {
      const Mesh cube = shapes::cube_grid(n, seed);
      std::vector<Vec3> p(cube.vertices());
      for (Vec3& v : p) v = v * (2.0 / n) - Vec3{1, 1, 1};
      return deform(cube.with_positions(std::move(p)), rng, true);
    }
    case 2: {
      const int minor = std::max(3, static_cast<int>(std::lround(std::sqrt(raw_faces / 4.0))));
      return deform(shapes::torus(2 * minor, minor), rng, true);
    }
    default:
      throw Error("synthetic shape class must be 0, 1 or 2");
  }
}

DatasetManifest generate_synthetic(const fs::path& dir, const SynthOptions& options) {
  if (options.variants < 1 || options.train_per_class < 0 || options.test_per_class < 0) {
    throw Error("invalid synthetic dataset sizes");
  }
  fs::create_directories(dir / "shapes");
  fs::create_directories(dir / "variants");
  const bool classify = options.task == nn::Task::Classify;
  const int classes = classify ? 3 : 1;
  const int per_class = options.train_per_class + options.test_per_class;

  DatasetManifest m;
  m.task = options.task;
  m.classes = classify ? 3 : 2;
  m.entries.resize(static_cast<std::size_t>(classes) * per_class);
  parallel_for(
      0, static_cast<int>(m.entries.size()),
      [&](int i) {
        const int cls = i / per_class, k = i % per_class;
        ManifestEntry& e = m.entries[i];
        const char* names[] = {"sphere", "box", "torus"};
        e.id = classify ? std::string(names[cls]) + "_" + std::to_string(k) : "hemi_" + std::to_string(k);
        e.split = k < options.train_per_class ? "train" : "test";
        const std::uint64_t shape_seed = options.seed * 1000003ULL + static_cast<std::uint64_t>(i) * 7919ULL + 1;
        Mesh raw;
        if (classify) {
          raw = synth_shape(cls, options.raw_faces, shape_seed);
          e.label = cls;
        } else {
          std::mt19937_64 rng(shape_seed);
          const int n = std::max(2, static_cast<int>(std::lround(std::sqrt(options.raw_faces / 12.0))));
          // Plain ellipsoids: bumps would blur where the equator lies.
          raw = deform(shapes::cube_sphere(n, 1.0, shape_seed), rng, false, 0.0);
          std::vector<int> labels(raw.face_count());
          for (int f = 0; f < raw.face_count(); ++f) labels[f] = raw.centroid(f).z > 0 ? 1 : 0;
          e.face_labels = dir / "shapes" / (e.id + ".labels");
          write_labels(labels, *e.face_labels);
        }
        e.obj = dir / "shapes" / (e.id + ".obj");
        save_obj(raw, e.obj);
        for (int v = 0; v < options.variants; ++v) {
          const fs::path out = dir / "variants" / (e.id + "_v" + std::to_string(v));
          DecimationOptions opt;
          bool done = false;
          for (int attempt = 0; attempt < 5 && !done; ++attempt) {
            opt.seed = shape_seed * 31 + static_cast<std::uint64_t>(v) * 101 + static_cast<std::uint64_t>(attempt);
            done = remesh_to_directory(raw, options.base_size, options.depth, opt, out).reached_target;
          }
          if (!done) throw Error("could not remesh synthetic shape " + e.id);
          e.variants.push_back(out);
        }
      },
      1);
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace subdivnet::pipeline
