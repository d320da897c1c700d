#pragma once

#include <array>
#include <span>
#include <vector>

#include "subdivnet/vec.h"

namespace subdivnet {

/// Positive when d lies inside the circumcircle of counterclockwise (a, b, c).
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

/// Signed area, positive for counterclockwise polygons.
double polygon_area(std::span<const Vec2> polygon);

/// Triangulates a simple counterclockwise polygon by ear clipping followed by
/// Lawson flips, which gives the constrained Delaunay triangulation with the
/// polygon boundary as constraints. Triangles index into `polygon` and are
/// counterclockwise. Returns an empty list if no valid ear can be found.
std::vector<std::array<int, 3>> triangulate_polygon(std::span<const Vec2> polygon);

/// Fan triangulation from polygon vertex `apex`. Triangles may be inverted if the
/// polygon is not star-shaped from the apex.
std::vector<std::array<int, 3>> fan_triangulation(int n, int apex);

/// Sutherland-Hodgman clip of a polygon by a counterclockwise triangle.
std::vector<Vec2> clip_to_triangle(std::span<const Vec2> polygon, const std::array<Vec2, 3>& tri);

/// A part of a clipped triangle lying inside one cell of a planar triangulation.
struct ClipPiece {
  int cell;
  std::vector<Vec2> polygon;
};

/// Splits a triangle along the edges of a triangulation so that every piece lies
/// in exactly one cell. Pieces with area below `min_area` are discarded.
std::vector<ClipPiece> split_flipped(const std::array<Vec2, 3>& triangle,
                                     std::span<const std::array<Vec2, 3>> cells,
                                     double min_area = 0.0);

}  // namespace subdivnet
