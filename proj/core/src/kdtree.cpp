#include "lodom/kdtree.hpp"

#include <algorithm>
#include <numeric>

#include "lodom/errors.hpp"

namespace lodom {

namespace {

// Strict ordering used for both heap pruning and final result order.
inline bool better(double sq_a, int idx_a, double sq_b, int idx_b) {
  if (sq_a != sq_b) return sq_a < sq_b;
  return idx_a < idx_b;
}

}  // namespace

KdTree::KdTree(const std::vector<Vec3>& points) : points_(points) {
  if (points_.empty()) throw NumericalError("KdTree: cannot index an empty point cloud");
  std::vector<int> order(points_.size());
  std::iota(order.begin(), order.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(order.data(), order.data() + order.size(), 0);
}

int KdTree::build(int* begin, int* end, int depth) {
  if (begin == end) return -1;
  const int axis = depth % 3;
  int* mid = begin + (end - begin) / 2;
  std::nth_element(begin, mid, end, [&](int a, int b) {
    if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
    return a < b;
  });
  Node node;
  node.point = *mid;
  node.axis = axis;
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid + 1, end, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

template <typename Visitor>
void KdTree::search(int node, const Vec3& query, Visitor& visit) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Vec3& p = points_[n.point];
  visit.offer(n.point, (query - p).squaredNorm());

  const double delta = query[n.axis] - p[n.axis];
  const int near = delta < 0.0 ? n.left : n.right;
  const int far = delta < 0.0 ? n.right : n.left;
  search(near, query, visit);
  if (delta * delta <= visit.bound()) search(far, query, visit);
}

KdTree::Neighbor KdTree::nearest(const Vec3& query) const {
  struct Best {
    Neighbor nb{-1, std::numeric_limits<double>::infinity()};
    void offer(int idx, double sq) {
      if (nb.index < 0 || better(sq, idx, nb.sq_dist, nb.index)) nb = {idx, sq};
    }
    double bound() const { return nb.sq_dist; }
  } best;
  search(root_, query, best);
  return best.nb;
}

std::vector<KdTree::Neighbor> KdTree::knearest(const Vec3& query, int k) const {
  struct KBest {
    int k;
    // max-heap on (sq_dist, index): the worst kept neighbor sits on top
    std::vector<Neighbor> heap;
    static bool heap_less(const Neighbor& a, const Neighbor& b) {
      return better(a.sq_dist, a.index, b.sq_dist, b.index);
    }
    void offer(int idx, double sq) {
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back({idx, sq});
        std::push_heap(heap.begin(), heap.end(), heap_less);
      } else if (better(sq, idx, heap.front().sq_dist, heap.front().index)) {
        std::pop_heap(heap.begin(), heap.end(), heap_less);
        heap.back() = {idx, sq};
        std::push_heap(heap.begin(), heap.end(), heap_less);
      }
    }
    double bound() const {
      if (static_cast<int>(heap.size()) < k) return std::numeric_limits<double>::infinity();
      return heap.front().sq_dist;
    }
  } best{std::max(k, 0), {}};
  if (k <= 0) return {};
  best.heap.reserve(k);
  search(root_, query, best);
  std::sort(best.heap.begin(), best.heap.end(), KBest::heap_less);
  return best.heap;
}

}  // namespace lodom
