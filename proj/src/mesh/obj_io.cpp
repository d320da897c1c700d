#include "subdivnet/obj_io.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "subdivnet/error.h"

namespace subdivnet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) tokens.push_back(s.substr(i, j - i));
    i = j;
  }
  return tokens;
}

double parse_double(std::string_view token, int line) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError("malformed number '" + std::string(token) + "'", line);
  }
  return value;
}

int parse_index(std::string_view token, int vertex_count, int line) {
  const auto slash = token.find('/');
  const std::string_view head = token.substr(0, slash);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) {
    throw ParseError("malformed face index '" + std::string(token) + "'", line);
  }
  const long resolved = value > 0 ? value - 1 : vertex_count + value;
  if (resolved < 0 || resolved >= vertex_count) {
    throw ParseError("face index " + std::to_string(value) + " out of range", line);
  }
  return static_cast<int>(resolved);
}

void append_number(std::string& out, double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

constexpr std::array<Vec3, 12> kPalette = {{
    {0.894, 0.102, 0.110},
    {0.216, 0.494, 0.722},
    {0.302, 0.686, 0.290},
    {0.596, 0.306, 0.639},
    {1.000, 0.498, 0.000},
    {1.000, 1.000, 0.200},
    {0.651, 0.337, 0.157},
    {0.969, 0.506, 0.749},
    {0.600, 0.600, 0.600},
    {0.400, 0.761, 0.647},
    {0.553, 0.627, 0.796},
    {0.906, 0.541, 0.765},
}};

}  // namespace

Vec3 label_color(int label) {
  const int n = static_cast<int>(kPalette.size());
  return kPalette[((label % n) + n) % n];
}

Mesh parse_obj(std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto tokens = split_ws(s);
    const std::string_view tag = tokens.front();
    if (tag == "v") {
      if (tokens.size() < 4) throw ParseError("vertex needs 3 coordinates", line_no);
      vertices.push_back({parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                          parse_double(tokens[3], line_no)});
    } else if (tag == "f") {
      if (tokens.size() != 4) {
        throw ParseError("non-triangle face with " + std::to_string(tokens.size() - 1) + " corners",
                         line_no);
      }
      const int n = static_cast<int>(vertices.size());
      Face face{parse_index(tokens[1], n, line_no), parse_index(tokens[2], n, line_no),
                parse_index(tokens[3], n, line_no)};
      if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
        throw ParseError("face repeats a vertex", line_no);
      }
      faces.push_back(face);
    }
    // vn, vt, g, o, s, usemtl, mtllib and unknown statements are ignored.
  }
  return Mesh(std::move(vertices), std::move(faces));
}

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return parse_obj(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_obj(std::ostream& out, const Mesh& mesh, std::optional<std::span<const int>> face_labels,
               std::string_view mtllib) {
  if (mesh.face_count() == 0) throw Error("refusing to write a mesh without faces");
  if (face_labels && static_cast<int>(face_labels->size()) != mesh.face_count()) {
    throw ShapeError("face label count does not match face count");
  }
  std::string buffer;
  buffer.reserve(static_cast<std::size_t>(mesh.vertex_count()) * 48 + mesh.face_count() * 24);
  if (!mtllib.empty()) {
    buffer += "mtllib ";
    buffer += mtllib;
    buffer += '\n';
  }
  for (const Vec3& p : mesh.vertices()) {
    buffer += "v ";
    append_number(buffer, p.x);
    buffer += ' ';
    append_number(buffer, p.y);
    buffer += ' ';
    append_number(buffer, p.z);
    buffer += '\n';
  }
  int current_label = 0;
  bool first = true;
  for (int f = 0; f < mesh.face_count(); ++f) {
    if (face_labels) {
      const int label = (*face_labels)[f];
      if (first || label != current_label) {
        buffer += "usemtl label_" + std::to_string(label) + "\n";
        current_label = label;
        first = false;
      }
    }
    const Face& t = mesh.face(f);
    buffer += "f " + std::to_string(t[0] + 1) + ' ' + std::to_string(t[1] + 1) + ' ' +
              std::to_string(t[2] + 1) + '\n';
  }
  out << buffer;
}

void save_obj(const Mesh& mesh, const std::filesystem::path& path,
              std::optional<std::span<const int>> face_labels) {
  std::string mtl_name;
  if (face_labels) {
    std::filesystem::path mtl_path = path;
    mtl_path.replace_extension(".mtl");
    mtl_name = mtl_path.filename().string();
    std::ofstream mtl(mtl_path);
    if (!mtl) throw IoError("cannot write " + mtl_path.string());
    const std::set<int> labels(face_labels->begin(), face_labels->end());
    for (int label : labels) {
      const Vec3 c = label_color(label);
      mtl << "newmtl label_" << label << "\nKd " << c.x << ' ' << c.y << ' ' << c.z << "\n\n";
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_obj(out, mesh, face_labels, mtl_name);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace subdivnet
