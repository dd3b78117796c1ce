#pragma once

#include <cstdint>
#include <vector>

#include "lodom/se3.hpp"

namespace lodom {

/// Exact 3D nearest-neighbor index (static kd-tree, median split).
/// Ties on distance are broken toward the lowest point index, so queries are
/// fully deterministic and match a (dist, index)-ordered linear scan.
class KdTree {
public:
  struct Neighbor {
    int index = -1;
    double sq_dist = 0.0;
  };

  /// Throws NumericalError on an empty point set.
  explicit KdTree(const std::vector<Vec3>& points);

  Neighbor nearest(const Vec3& query) const;

  /// k nearest neighbors ordered by (sq_dist, index) ascending. Returns fewer
  /// than k when the tree holds fewer points.
  std::vector<Neighbor> knearest(const Vec3& query, int k) const;

  int size() const { return static_cast<int>(points_.size()); }

private:
  struct Node {
    int point = -1;     // index into points_
    int axis = 0;
    int left = -1;      // node indices, -1 = none
    int right = -1;
  };

  int build(int* begin, int* end, int depth);

  template <typename Visitor>
  void search(int node, const Vec3& query, Visitor& visit) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace lodom
