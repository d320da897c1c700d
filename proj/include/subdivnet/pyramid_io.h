#pragma once

#include <filesystem>

#include "subdivnet/hierarchy.h"

namespace subdivnet {

inline constexpr int kPyramidFormatVersion = 1;

/// Directory layout: level_<i>.obj for every level, facemap_<i>.json for i >= 1
/// ({"parent_of": [...], "central_child": [...]}), and pyramid.json
/// ({"format_version", "depth", "base_size"}).
void save_pyramid(const MeshPyramid& pyramid, const std::filesystem::path& dir);

/// Child order is rebuilt from vertex inclusion. Throws on missing files,
/// version mismatch or a pyramid that fails check_pyramid.
MeshPyramid load_pyramid(const std::filesystem::path& dir);

}  // namespace subdivnet
