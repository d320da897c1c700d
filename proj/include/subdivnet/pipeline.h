#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subdivnet/mesh.h"
#include "subdivnet/nn/data.h"
#include "subdivnet/nn/model.h"
#include "subdivnet/nn/train.h"
#include "subdivnet/remesh.h"

namespace subdivnet::pipeline {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string id;
  fs::path obj;
  /// Class label (classification).
  std::optional<int> label;
  /// Per-face labels of `obj`, one integer per line (segmentation).
  std::optional<fs::path> face_labels;
  std::string split = "train";
  /// Remeshed pyramid directories.
  std::vector<fs::path> variants;
};

/// JSON: {"task": "classify"|"segment", "classes": n, "shapes": [{"id", "obj",
/// "label" | "face_labels", "split", "variants": [...]}]}. Paths are relative
/// to the manifest's directory.
struct DatasetManifest {
  nn::Task task = nn::Task::Classify;
  int classes = 0;
  std::vector<ManifestEntry> entries;
};

/// Resolves paths against the manifest directory and checks that they exist and
/// that labels match the task. Throws ParseError or IoError.
DatasetManifest load_manifest(const fs::path& path);
/// Writes paths relative to the manifest directory.
void save_manifest(const DatasetManifest& manifest, const fs::path& path);

std::vector<int> read_labels(const fs::path& path);
void write_labels(std::span<const int> labels, const fs::path& path);

/// One sample per variant of every entry in `split` (all entries when empty).
/// Per-face labels of the raw mesh are carried to the finest level by nearest-face transfer.
std::vector<nn::Sample> load_samples(const DatasetManifest& manifest, const std::string& split);

/// Runs remesh() and writes the pyramid plus parammap.json into `dir`.
RemeshResult remesh_to_directory(const Mesh& mesh, int base_size, int depth, const DecimationOptions& options,
                                 const fs::path& dir);

struct SynthOptions {
  nn::Task task = nn::Task::Classify;
  int train_per_class = 20;
  int test_per_class = 10;
  int variants = 3;
  int base_size = 48;
  int depth = 3;
  /// Approximate face count of the raw meshes.
  int raw_faces = 3000;
  std::uint64_t seed = 0;
};

/// Raw shape of a class (0 sphere, 1 box, 2 torus) with a random anisotropic
/// scale, rotation and smooth radial bumps.
Mesh synth_shape(int shape_class, int raw_faces, std::uint64_t seed);

/// Writes raw meshes, remeshed variants and manifest.json under `dir`.
/// Classification: 3 classes (sphere, box, torus), bumped, scaled and rotated.
/// Segmentation: axis-scaled spheres whose faces are labelled by the sign of the
/// centroid's z coordinate.
DatasetManifest generate_synthetic(const fs::path& dir, const SynthOptions& options);

/// `key = value` lines; '#' starts a comment. Throws ParseError with the line number.
std::map<std::string, std::string> parse_config(const std::string& text);
std::map<std::string, std::string> load_config(const fs::path& path);

/// Training configuration keys:
///   epochs, batch_size, optimizer (adam|sgd), learning_rate, momentum,
///   weight_decay, seed, channels (comma list, classifier), width (segmenter).
struct TrainConfig {
  nn::TrainOptions options;
  std::vector<int> channels;
  int width = 16;
};
/// Unknown keys and malformed values throw ParseError.
TrainConfig train_config(const std::map<std::string, std::string>& values, TrainConfig base = {});

/// Builds the reference network for the manifest's task and the samples' depth.
nn::Model build_model(const DatasetManifest& manifest, int depth, const TrainConfig& config);

}  // namespace subdivnet::pipeline
