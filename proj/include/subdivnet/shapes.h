#pragma once

#include <cstdint>
#include <optional>

#include "subdivnet/mesh.h"

namespace subdivnet::shapes {

// Closed, outward-oriented test and training surfaces.

Mesh tetrahedron();
Mesh octahedron();
Mesh icosahedron();  ///< Unit circumradius.

/// Surface of the integer lattice cube [0, n]^3, each unit square split into two
/// triangles. With diagonal_seed the split diagonal is chosen at random per square.
Mesh cube_grid(int n, std::optional<std::uint64_t> diagonal_seed = std::nullopt);

/// cube_grid(n) centered and projected onto the sphere of the given radius.
Mesh cube_sphere(int n, double radius = 1.0,
                 std::optional<std::uint64_t> diagonal_seed = std::nullopt);

/// Icosahedron refined `levels` times by midpoint splits, projected to the unit sphere.
Mesh icosphere(int levels);

/// Parametric torus on a major x minor grid.
Mesh torus(int major_segments, int minor_segments, double major_radius = 1.0,
           double minor_radius = 0.4);

/// Boundary of a voxel ladder with `genus` square holes, each voxel face split
/// into a refine x refine grid.
Mesh holed_plate(int genus, int refine = 1);

}  // namespace subdivnet::shapes
