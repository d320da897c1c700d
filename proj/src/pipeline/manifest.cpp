#include <fstream>
#include <json.hpp>
#include <sstream>

#include "subdivnet/error.h"
#include "subdivnet/obj_io.h"
#include "subdivnet/parallel.h"
#include "subdivnet/pipeline.h"
#include "subdivnet/pyramid_io.h"

namespace subdivnet::pipeline {

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw IoError(what + " does not exist: " + p.string());
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  const fs::path rel = fs::relative(fs::absolute(p), fs::absolute(base));
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    const std::string task = j.value("task", "classify");
    if (task != "classify" && task != "segment") throw ParseError("manifest task must be classify or segment");
    m.task = task == "classify" ? nn::Task::Classify : nn::Task::Segment;
    m.classes = j.at("classes");
    if (m.classes < 1) throw ParseError("manifest needs at least one class");
    for (const auto& s : j.at("shapes")) {
      ManifestEntry e;
      e.id = s.at("id");
      e.obj = resolve(base, s.at("obj"));
      e.split = s.value("split", "train");
      if (e.split != "train" && e.split != "test") throw ParseError("shape " + e.id + ": split must be train or test");
      if (s.contains("label")) e.label = s.at("label").get<int>();
      if (s.contains("face_labels")) e.face_labels = resolve(base, s.at("face_labels"));
      for (const auto& v : s.at("variants")) e.variants.push_back(resolve(base, v.get<std::string>()));
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  for (const ManifestEntry& e : m.entries) {
    require_exists(e.obj, "shape " + e.id + " mesh");
    for (const fs::path& v : e.variants) require_exists(v, "shape " + e.id + " variant");
    if (e.variants.empty()) throw ParseError("shape " + e.id + " has no remeshed variants");
    if (m.task == nn::Task::Classify) {
      if (!e.label) throw ParseError("shape " + e.id + " needs a class label");
      if (*e.label < 0 || *e.label >= m.classes) throw ParseError("shape " + e.id + ": label out of range");
    } else {
      if (!e.face_labels) throw ParseError("shape " + e.id + " needs per-face labels");
      require_exists(*e.face_labels, "shape " + e.id + " face labels");
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  nlohmann::json shapes = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.entries) {
    nlohmann::json s{{"id", e.id}, {"obj", relative_to(e.obj, base)}, {"split", e.split}};
    if (e.label) s["label"] = *e.label;
    if (e.face_labels) s["face_labels"] = relative_to(*e.face_labels, base);
    nlohmann::json variants = nlohmann::json::array();
    for (const fs::path& v : e.variants) variants.push_back(relative_to(v, base));
    s["variants"] = variants;
    shapes.push_back(s);
  }
  const nlohmann::json j{{"task", manifest.task == nn::Task::Classify ? "classify" : "segment"},
                         {"classes", manifest.classes},
                         {"shapes", shapes}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<int> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<int> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    int v;
    std::string rest;
    if (!(ls >> v) || (ls >> rest)) throw ParseError(path.string() + ": expected one integer label", number);
    out.push_back(v);
  }
  return out;
}

void write_labels(std::span<const int> labels, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<nn::Sample> load_samples(const DatasetManifest& manifest, const std::string& split) {
  struct Job {
    const ManifestEntry* entry;
    fs::path variant;
  };
  std::vector<Job> jobs;
  for (const ManifestEntry& e : manifest.entries) {
    if (!split.empty() && e.split != split) continue;
    for (const fs::path& v : e.variants) jobs.push_back({&e, v});
  }
  std::vector<nn::Sample> samples(jobs.size());
  parallel_for(
      0, static_cast<int>(jobs.size()),
      [&](int i) {
        const ManifestEntry& e = *jobs[i].entry;
        nn::Sample& s = samples[i];
        s.shape_id = e.id;
        s.pyramid = load_pyramid(jobs[i].variant);
        s.features = nn::pyramid_features(s.pyramid);
        if (e.label) s.label = *e.label;
        if (e.face_labels) {
          const Mesh raw = load_obj(e.obj);
          const auto labels = read_labels(*e.face_labels);
          s.face_labels = transfer_labels(raw, labels, s.pyramid.finest());
        }
      },
      1);
  return samples;
}

RemeshResult remesh_to_directory(const Mesh& mesh, int base_size, int depth, const DecimationOptions& options,
                                 const fs::path& dir) {
  RemeshResult r = remesh(mesh, base_size, depth, options);
  if (!r.reached_target) return r;
  save_pyramid(r.pyramid, dir);
  std::ofstream out(dir / "parammap.json");
  if (!out) throw IoError("cannot write " + (dir / "parammap.json").string());
  out << param_map_json(r.param) << '\n';
  return r;
}

}  // namespace subdivnet::pipeline
