#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>

#include "subdivnet/mesh.h"

namespace subdivnet {

/// Reads the `v x y z` / `f i j k` subset of Wavefront OBJ. Face corners in
/// `i/t/n` form are accepted and the texture/normal indices ignored; negative
/// (relative) indices are resolved. Other statements are skipped.
/// Throws ParseError on malformed lines, non-triangle faces and bad indices.
Mesh parse_obj(std::istream& in);
Mesh load_obj(const std::filesystem::path& path);

/// Writes positions in shortest round-trip decimal form so a reload is bit-exact.
/// With face_labels, consecutive runs of equal labels are emitted under
/// `usemtl label_<n>` and a sibling .mtl file with a fixed palette is written
/// (save_obj only; write_obj expects the caller to provide the mtllib).
void write_obj(std::ostream& out, const Mesh& mesh,
               std::optional<std::span<const int>> face_labels = std::nullopt,
               std::string_view mtllib = {});
void save_obj(const Mesh& mesh, const std::filesystem::path& path,
              std::optional<std::span<const int>> face_labels = std::nullopt);

/// RGB in [0, 1] for a label; cycles through a fixed 12-entry palette.
Vec3 label_color(int label);

}  // namespace subdivnet
