#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace oanav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;

/// Raised for violated preconditions and malformed inputs across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wraps an angle to [-pi, pi).
double wrap_angle(double a);

/// Smallest signed difference a - b, wrapped to [-pi, pi).
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

/// Absolute angular distance between a and b when orientations are only
/// defined modulo `period` (2*pi for asymmetric objects, pi for 2-fold ones).
double angle_dist_mod(double a, double b, double period);

Mat3 rot_z(double yaw);

/// Rigid transform; maps points from the source frame into the target frame.
struct Pose3 {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose3 identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }
  Pose3 inverse() const;

  bool is_valid(double tol = 1e-9) const;
};

/// a ∘ b : first b, then a.
Pose3 compose(const Pose3& a, const Pose3& b);
inline Pose3 operator*(const Pose3& a, const Pose3& b) { return compose(a, b); }

/// Pose with rotation restricted to the z axis.
struct YawPose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;

  Pose3 to_pose3() const;
  /// Projects a general pose onto its translation and heading.
  static YawPose from_pose3(const Pose3& p);
  Vec3 position() const { return {x, y, z}; }
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  static Aabb empty();
};

struct OrientedBox3 {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;

  double volume() const { return size.x() * size.y() * size.z(); }
  /// Bottom face counter-clockwise, then top face in the same order.
  std::array<Vec3, 8> corners() const;
  /// Footprint polygon (counter-clockwise) in the xy plane.
  std::array<Vec2, 4> footprint() const;
  Aabb aabb() const;
  bool contains(const Vec3& p, double margin = 0.0) const;

  /// Inverse of corners(); expects the ordering corners() produces.
  static OrientedBox3 from_corners(const std::array<Vec3, 8>& c);
};

struct Triangle {
  Vec3 a;
  Vec3 b;
  Vec3 c;

  Vec3 normal() const { return (b - a).cross(c - a).normalized(); }
  double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
};

/// Points with optional per-point unit normals and integer labels.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<int> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_labels() const { return !labels.empty(); }

  void push_back(const Vec3& p, int label) {
    points.push_back(p);
    labels.push_back(label);
  }
  void append(const PointCloud& other);
  PointCloud transformed(const Pose3& t) const;
  PointCloud subset(const std::vector<std::size_t>& idx) const;
  /// Throws Error when the normal/label arrays are inconsistent.
  void validate() const;
};

/// 3D generalized IoU of two yaw-rotated boxes. The enclosing box is the
/// smallest box aligned with the yaw of `a` that contains both.
double box_giou3d(const OrientedBox3& a, const OrientedBox3& b);
/// Rotated 3D IoU (the first term of box_giou3d).
double box_iou3d(const OrientedBox3& a, const OrientedBox3& b);

/// Intersection area of two convex polygons given counter-clockwise.
double convex_intersection_area(const std::vector<Vec2>& p, const std::vector<Vec2>& q);
double polygon_area(const std::vector<Vec2>& poly);

/// Nearest non-negative entry distance; 0 when the origin is inside.
std::optional<double> ray_aabb_hit(const Vec3& origin, const Vec3& dir, const Aabb& box);
/// Möller–Trumbore. Hits at distance <= 0 are ignored.
std::optional<double> ray_triangle_hit(const Vec3& origin, const Vec3& dir, const Triangle& tri);

/// Closest point on a triangle to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Triangle& tri);

}  // namespace oanav
