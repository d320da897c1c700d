#pragma once

#include <array>
#include <vector>

#include "subdivnet/mesh.h"

namespace subdivnet {

/// Closest point on triangle (a, b, c) to p, with its barycentric coordinates.
struct TrianglePoint {
  Vec3 point;
  std::array<double, 3> bary;
};
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct NearestFace {
  int face = -1;
  double distance = 0;
  Vec3 point;
};

/// Bounding volume hierarchy over the faces of a mesh for nearest-face queries.
/// Ties are broken towards the smaller face index.
class FaceBvh {
 public:
  explicit FaceBvh(const Mesh& mesh);
  NearestFace nearest(const Vec3& p) const;

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };
  int build(int begin, int end);
  void query(int node, const Vec3& p, NearestFace& best, double& best_d2) const;

  const Mesh* mesh_;
  std::vector<int> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

}  // namespace subdivnet
