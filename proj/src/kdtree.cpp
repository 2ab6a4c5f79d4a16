#include "oanav/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace oanav {

namespace {
constexpr std::size_t kLeafSize = 12;
}

KdTree3::KdTree3(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }
  sorted_.reserve(points_.size());
  for (const std::size_t i : order_) sorted_.push_back(points_[i]);
}

int KdTree3::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  Aabb box = Aabb::empty();
  for (std::size_t i = begin; i < end; ++i) box.expand(points_[order_[i]]);
  int axis = 0;
  box.extent().maxCoeff(&axis);
  if (box.extent()[axis] <= 0.0) return id;  // all coincident

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::optional<KdTree3::Neighbor> KdTree3::nearest(const Vec3& q, double max_dist, std::span<const char> mask) const {
  if (points_.empty()) return std::nullopt;
  if (!mask.empty() && mask.size() != points_.size()) throw Error("kdtree: mask size mismatch");
  Neighbor best{std::numeric_limits<std::size_t>::max(), max_dist * max_dist};
  if (mask.empty()) {
    nearest_impl<false>(0, q, best, nullptr);
  } else {
    nearest_impl<true>(0, q, best, mask.data());
  }
  if (best.index == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return best;
}

template <bool Masked>
void KdTree3::nearest_impl(int node_id, const Vec3& q, Neighbor& best, const char* mask) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      if constexpr (Masked) {
        if (!mask[idx]) continue;
      }
      const double d2 = (sorted_[i] - q).squaredNorm();
      // Ties resolve to the lower index so results do not depend on layout.
      if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) best = {idx, d2};
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int first = diff < 0.0 ? node.left : node.right;
  const int second = diff < 0.0 ? node.right : node.left;
  nearest_impl<Masked>(first, q, best, mask);
  if (diff * diff <= best.dist2) nearest_impl<Masked>(second, q, best, mask);
}

void KdTree3::radius(const Vec3& q, double r, std::vector<std::size_t>& out) const {
  out.clear();
  if (points_.empty()) return;
  radius_impl(0, q, r * r, out);
}

void KdTree3::radius_impl(int node_id, const Vec3& q, double r2, std::vector<std::size_t>& out) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      if ((sorted_[i] - q).squaredNorm() <= r2) out.push_back(idx);
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  if (diff <= 0.0 || diff * diff <= r2) radius_impl(node.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) radius_impl(node.right, q, r2, out);
}

}  // namespace oanav
