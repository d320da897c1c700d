#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "subdivnet/hierarchy.h"
#include "subdivnet/mesh.h"

namespace subdivnet {

/// First hop direction of zig-zag dilation. Zig is counterclockwise.
enum class Parity : std::uint32_t { ZigFirst = 0, ZagFirst = 1 };

/// The 3 neighbors of f counterclockwise, starting with the one opposite local vertex 0.
std::array<int, 3> ring_order(const Mesh& mesh, int f);

/// Length of a kernel pattern for odd k >= 3.
int pattern_length(int k);

/// In-order serialization of the depth-limited neighbor tree of f, read as a
/// closed counterclockwise ring. Supports k in {3, 5, 7}; duplicates are kept.
std::vector<int> kernel_pattern(const Mesh& mesh, int f, int k);

/// 3-face pattern: from each ring neighbor take d - 1 hops alternating between the
/// counterclockwise and clockwise far edges. d = 1 gives ring_order(f).
std::array<int, 3> dilated_pattern(const Mesh& mesh, int f, int d, Parity parity = Parity::ZigFirst);

/// Flattened rows of kernel patterns for one convolution layer.
struct KernelIndexBuffer {
  int kernel_size = 3;
  int dilation = 1;
  int stride = 1;
  Parity parity = Parity::ZigFirst;
  /// Level whose faces the row entries index.
  int level = 0;
  /// Face count of `level`.
  int input_faces = 0;
  int row_length = 3;
  /// Face at `level` each row is centered on (a central child when stride is 2).
  std::vector<int> anchors;
  /// rows() x row_length entries, row-major.
  std::vector<std::int32_t> indices;

  int rows() const { return static_cast<int>(anchors.size()); }
  /// Pyramid level of the output rows.
  int output_level() const { return stride == 2 ? level - 1 : level; }
  const std::int32_t* row(int r) const { return indices.data() + static_cast<std::size_t>(r) * row_length; }

  friend bool operator==(const KernelIndexBuffer&, const KernelIndexBuffer&) = default;
};

/// Compiles patterns at `level`. Stride 2 yields one row per face of level - 1,
/// centered on that face's central child. Kernel sizes above 3 require d = 1.
KernelIndexBuffer compile_index_buffer(const MeshPyramid& pyramid, int level, int k, int d,
                                       int stride, Parity parity = Parity::ZigFirst);

/// Same as above for a single mesh, stride 1.
KernelIndexBuffer compile_index_buffer(const Mesh& mesh, int k, int d, Parity parity = Parity::ZigFirst);

inline constexpr std::uint32_t kIndexBufferVersion = 1;

/// Little-endian binary: "SDVN", version, level, k, d, stride, parity (u32 each),
/// rows (u64), row_len (u32), then rows * row_len u32 face indices.
void write_index_buffer(std::ostream& out, const KernelIndexBuffer& buffer);
KernelIndexBuffer read_index_buffer(std::istream& in);
void save_index_buffer(const KernelIndexBuffer& buffer, const std::filesystem::path& path);
KernelIndexBuffer load_index_buffer(const std::filesystem::path& path);

/// JSON mirror of the binary form.
std::string index_buffer_json(const KernelIndexBuffer& buffer);

}  // namespace subdivnet
