#include "subdivnet/pyramid_io.h"

#include <fstream>
#include <json.hpp>
#include <string>

#include "subdivnet/error.h"
#include "subdivnet/obj_io.h"

namespace subdivnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

}  // namespace

void save_pyramid(const MeshPyramid& pyramid, const fs::path& dir) {
  if (const auto problem = check_pyramid(pyramid); !problem.empty()) {
    throw TopologyError("save_pyramid: " + problem);
  }
  fs::create_directories(dir);
  for (int i = 0; i <= pyramid.depth(); ++i) {
    save_obj(pyramid.level(i), dir / ("level_" + std::to_string(i) + ".obj"));
    if (i >= 1) {
      const FaceMap& map = pyramid.face_map(i);
      write_json(dir / ("facemap_" + std::to_string(i) + ".json"),
                 json{{"parent_of", map.parent_of}, {"central_child", map.central_child}});
    }
  }
  write_json(dir / "pyramid.json", json{{"format_version", kPyramidFormatVersion},
                                        {"depth", pyramid.depth()},
                                        {"base_size", pyramid.base_size()}});
}

MeshPyramid load_pyramid(const fs::path& dir) {
  const json manifest = read_json(dir / "pyramid.json");
  const int version = manifest.value("format_version", -1);
  if (version != kPyramidFormatVersion) {
    throw ParseError(dir.string() + ": unsupported pyramid format version " +
                     std::to_string(version));
  }
  const int depth = manifest.at("depth").get<int>();
  MeshPyramid pyramid;
  for (int i = 0; i <= depth; ++i) {
    pyramid.levels.push_back(load_obj(dir / ("level_" + std::to_string(i) + ".obj")));
  }
  for (int i = 1; i <= depth; ++i) {
    const json j = read_json(dir / ("facemap_" + std::to_string(i) + ".json"));
    FaceMap map;
    map.parent_of = j.at("parent_of").get<std::vector<int>>();
    map.central_child = j.at("central_child").get<std::vector<int>>();
    const Mesh& fine = pyramid.levels[i];
    const Mesh& coarse = pyramid.levels[i - 1];
    if (map.fine_count() != fine.face_count() || map.coarse_count() != coarse.face_count()) {
      throw ParseError(dir.string() + ": face map " + std::to_string(i) + " has the wrong size");
    }
    map.children.assign(coarse.face_count(), {-1, -1, -1, -1});
    for (int p = 0; p < coarse.face_count(); ++p) map.children[p][3] = map.central_child[p];
    for (int f = 0; f < fine.face_count(); ++f) {
      const int p = map.parent_of[f];
      if (p < 0 || p >= coarse.face_count()) {
        throw ParseError(dir.string() + ": parent index out of range");
      }
      if (map.central_child[p] == f) continue;
      for (int j = 0; j < 3; ++j) {
        if (fine.local_index(f, coarse.face(p)[j]) >= 0) map.children[p][j] = f;
      }
    }
    pyramid.maps.push_back(std::move(map));
  }
  if (const auto problem = check_pyramid(pyramid); !problem.empty()) {
    throw TopologyError(dir.string() + ": " + problem);
  }
  return pyramid;
}

}  // namespace subdivnet
