#pragma once

#include "oanav/geometry.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace oanav {

/// Static 3D k-d tree with exact nearest-neighbour and radius queries.
class KdTree3 {
 public:
  struct Neighbor {
    std::size_t index;
    double dist2;
  };

  KdTree3() = default;
  explicit KdTree3(std::span<const Vec3> points);

  /// Nearest point strictly within `max_dist`, or none. With a nonempty
  /// `mask`, points whose mask entry is zero are skipped.
  std::optional<Neighbor> nearest(const Vec3& q, double max_dist, std::span<const char> mask = {}) const;
  /// All indices within `radius` of q (unordered).
  void radius(const Vec3& q, double radius, std::vector<std::size_t>& out) const;

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end);
  template <bool Masked>
  void nearest_impl(int node, const Vec3& q, Neighbor& best, const char* mask) const;
  void radius_impl(int node, const Vec3& q, double r2, std::vector<std::size_t>& out) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Vec3> sorted_;  // points_ in leaf order
  std::vector<Node> nodes_;
};

}  // namespace oanav
