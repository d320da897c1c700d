#include "subdivnet/patterns.h"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>
#include "subdivnet/error.h"
#include "subdivnet/parallel.h"

namespace subdivnet {

namespace {

void check_face(const Mesh& mesh, int f) {
  if (f < 0 || f >= mesh.face_count()) {
    throw ShapeError("face index " + std::to_string(f) + " out of range");
  }
}

/// A face reached across a known edge: `s` is its local vertex opposite that edge.
struct Entry {
  int face;
  int s;
};

/// Enters the neighbor of `from` across the edge opposite local vertex t.
Entry cross(const Mesh& mesh, int from, int t) {
  const int g = mesh.neighbors(from)[t];
  if (g == kNoFace) throw TopologyError("pattern requires a closed manifold (open edge at face " +
                                        std::to_string(from) + ")");
  const Face& fv = mesh.face(from);
  const int a = fv[(t + 1) % 3];
  const int b = fv[(t + 2) % 3];
  const Face& gv = mesh.face(g);
  for (int s = 0; s < 3; ++s) {
    if (gv[s] != a && gv[s] != b) return {g, s};
  }
  throw TopologyError("degenerate adjacency at face " + std::to_string(from));
}

/// Counterclockwise far neighbor (zig) and clockwise far neighbor (zag) of an entry.
Entry zig(const Mesh& mesh, Entry e) { return cross(mesh, e.face, (e.s + 1) % 3); }
Entry zag(const Mesh& mesh, Entry e) { return cross(mesh, e.face, (e.s + 2) % 3); }

void in_order(const Mesh& mesh, Entry e, int depth, std::vector<int>& out) {
  if (depth > 1) in_order(mesh, zig(mesh, e), depth - 1, out);
  out.push_back(e.face);
  if (depth > 1) in_order(mesh, zag(mesh, e), depth - 1, out);
}

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw ParseError("truncated index buffer", 0);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

std::array<int, 3> ring_order(const Mesh& mesh, int f) {
  check_face(mesh, f);
  return mesh.neighbors(f);
}

int pattern_length(int k) {
  if (k < 3 || k % 2 == 0) throw Error("kernel size must be odd and >= 3");
  return 3 * ((1 << ((k - 1) / 2)) - 1);
}

std::vector<int> kernel_pattern(const Mesh& mesh, int f, int k) {
  if (k != 3 && k != 5 && k != 7) throw Error("unsupported kernel size " + std::to_string(k));
  check_face(mesh, f);
  std::vector<int> out;
  out.reserve(pattern_length(k));
  for (int t = 0; t < 3; ++t) in_order(mesh, cross(mesh, f, t), (k - 1) / 2, out);
  return out;
}

std::array<int, 3> dilated_pattern(const Mesh& mesh, int f, int d, Parity parity) {
  if (d < 1) throw Error("dilation must be positive");
  check_face(mesh, f);
  std::array<int, 3> out{};
  for (int t = 0; t < 3; ++t) {
    Entry e = cross(mesh, f, t);
    bool ccw = parity == Parity::ZigFirst;
    for (int hop = 1; hop < d; ++hop) {
      e = ccw ? zig(mesh, e) : zag(mesh, e);
      ccw = !ccw;
    }
    out[t] = e.face;
  }
  return out;
}

namespace {

KernelIndexBuffer compile_rows(const Mesh& mesh, std::vector<int> anchors, int level, int k, int d,
                               int stride, Parity parity) {
  if (k > 3 && d > 1) throw Error("dilation is only supported with kernel size 3");
  if (d < 1) throw Error("dilation must be positive");
  KernelIndexBuffer buf;
  buf.kernel_size = k;
  buf.dilation = d;
  buf.stride = stride;
  buf.parity = parity;
  buf.level = level;
  buf.input_faces = mesh.face_count();
  buf.row_length = pattern_length(k);
  buf.anchors = std::move(anchors);
  buf.indices.assign(static_cast<std::size_t>(buf.rows()) * buf.row_length, 0);
  parallel_for(0, buf.rows(), [&](int r) {
    auto* row = buf.indices.data() + static_cast<std::size_t>(r) * buf.row_length;
    if (k == 3) {
      const auto p = dilated_pattern(mesh, buf.anchors[r], d, parity);
      std::copy(p.begin(), p.end(), row);
    } else {
      const auto p = kernel_pattern(mesh, buf.anchors[r], k);
      std::copy(p.begin(), p.end(), row);
    }
  });
  return buf;
}

}  // namespace

KernelIndexBuffer compile_index_buffer(const MeshPyramid& pyramid, int level, int k, int d,
                                       int stride, Parity parity) {
  if (level < 0 || level > pyramid.depth()) throw Error("invalid level " + std::to_string(level));
  if (stride != 1 && stride != 2) throw Error("stride must be 1 or 2");
  if (stride == 2 && level < 1) throw Error("stride 2 requires level >= 1");
  const Mesh& mesh = pyramid.level(level);
  std::vector<int> anchors;
  if (stride == 1) {
    anchors.resize(mesh.face_count());
    for (int f = 0; f < mesh.face_count(); ++f) anchors[f] = f;
  } else {
    anchors = pyramid.face_map(level).central_child;
  }
  return compile_rows(mesh, std::move(anchors), level, k, d, stride, parity);
}

KernelIndexBuffer compile_index_buffer(const Mesh& mesh, int k, int d, Parity parity) {
  std::vector<int> anchors(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) anchors[f] = f;
  return compile_rows(mesh, std::move(anchors), 0, k, d, 1, parity);
}

void write_index_buffer(std::ostream& out, const KernelIndexBuffer& b) {
  out.write("SDVN", 4);
  put<std::uint32_t>(out, kIndexBufferVersion);
  put<std::uint32_t>(out, b.level);
  put<std::uint32_t>(out, b.kernel_size);
  put<std::uint32_t>(out, b.dilation);
  put<std::uint32_t>(out, b.stride);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(b.parity));
  put<std::uint64_t>(out, b.rows());
  put<std::uint32_t>(out, b.row_length);
  for (std::int32_t i : b.indices) put<std::uint32_t>(out, i);
  // Trailer: row anchors and the input face count.
  for (int a : b.anchors) put<std::uint32_t>(out, a);
  put<std::uint32_t>(out, b.input_faces);
}

KernelIndexBuffer read_index_buffer(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SDVN") throw ParseError("not an index buffer", 0);
  const auto version = get<std::uint32_t>(in);
  if (version != kIndexBufferVersion) {
    throw ParseError("unsupported index buffer version " + std::to_string(version), 0);
  }
  KernelIndexBuffer b;
  b.level = get<std::uint32_t>(in);
  b.kernel_size = get<std::uint32_t>(in);
  b.dilation = get<std::uint32_t>(in);
  b.stride = get<std::uint32_t>(in);
  b.parity = static_cast<Parity>(get<std::uint32_t>(in));
  const auto rows = get<std::uint64_t>(in);
  b.row_length = get<std::uint32_t>(in);
  b.indices.resize(rows * b.row_length);
  for (auto& i : b.indices) i = static_cast<std::int32_t>(get<std::uint32_t>(in));
  b.anchors.resize(rows);
  for (auto& a : b.anchors) a = static_cast<int>(get<std::uint32_t>(in));
  b.input_faces = get<std::uint32_t>(in);
  return b;
}

void save_index_buffer(const KernelIndexBuffer& buffer, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_index_buffer(out, buffer);
  if (!out) throw IoError("write failed: " + path.string());
}

KernelIndexBuffer load_index_buffer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_index_buffer(in);
}

std::string index_buffer_json(const KernelIndexBuffer& b) {
  nlohmann::json j;
  j["format_version"] = kIndexBufferVersion;
  j["level"] = b.level;
  j["kernel_size"] = b.kernel_size;
  j["dilation"] = b.dilation;
  j["stride"] = b.stride;
  j["parity"] = b.parity == Parity::ZigFirst ? "zig" : "zag";
  j["input_faces"] = b.input_faces;
  j["row_length"] = b.row_length;
  j["anchors"] = b.anchors;
  auto rows = nlohmann::json::array();
  for (int r = 0; r < b.rows(); ++r) rows.push_back(std::vector<int>(b.row(r), b.row(r) + b.row_length));
  j["rows"] = std::move(rows);
  return j.dump(1);
}

}  // namespace subdivnet
