#include "oanav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oanav {

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  // fmod can land exactly on +pi after the shift for inputs just below -pi.
  if (r >= kPi) r -= 2.0 * kPi;
  return r;
}

double angle_dist_mod(double a, double b, double period) {
  double d = std::fmod(std::abs(a - b), period);
  return std::min(d, period - d);
}

Mat3 rot_z(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Pose3 Pose3::inverse() const {
  Pose3 out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

bool Pose3::is_valid(double tol) const {
  const Mat3 should_be_identity = rotation.transpose() * rotation;
  return (should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

Pose3 compose(const Pose3& a, const Pose3& b) {
  Pose3 out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose3 YawPose::to_pose3() const {
  Pose3 p;
  p.rotation = rot_z(yaw);
  p.translation = Vec3(x, y, z);
  return p;
}

YawPose YawPose::from_pose3(const Pose3& p) {
  YawPose out;
  out.x = p.translation.x();
  out.y = p.translation.y();
  out.z = p.translation.z();
  out.yaw = wrap_angle(std::atan2(p.rotation(1, 0), p.rotation(0, 0)));
  return out;
}

Aabb Aabb::empty() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {Vec3::Constant(inf), Vec3::Constant(-inf)};
}

std::array<Vec3, 8> OrientedBox3::corners() const {
  const Mat3 r = rot_z(yaw);
  const Vec3 h = 0.5 * size;
  const std::array<Vec3, 4> base = {Vec3(h.x(), h.y(), 0.0), Vec3(-h.x(), h.y(), 0.0),
                                    Vec3(-h.x(), -h.y(), 0.0), Vec3(h.x(), -h.y(), 0.0)};
  std::array<Vec3, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = center + r * (base[i] - Vec3(0, 0, h.z()));
    out[i + 4] = center + r * (base[i] + Vec3(0, 0, h.z()));
  }
  return out;
}

std::array<Vec2, 4> OrientedBox3::footprint() const {
  const auto c = corners();
  return {c[0].head<2>(), c[1].head<2>(), c[2].head<2>(), c[3].head<2>()};
}

Aabb OrientedBox3::aabb() const {
  Aabb box = Aabb::empty();
  for (const auto& c : corners()) box.expand(c);
  return box;
}

bool OrientedBox3::contains(const Vec3& p, double margin) const {
  const Vec3 local = rot_z(-yaw) * (p - center);
  return (local.cwiseAbs().array() <= (0.5 * size.array() + margin)).all();
}

OrientedBox3 OrientedBox3::from_corners(const std::array<Vec3, 8>& c) {
  OrientedBox3 box;
  Vec3 sum = Vec3::Zero();
  for (const auto& p : c) sum += p;
  box.center = sum / 8.0;
  const Vec3 ex = c[0] - c[1];
  const Vec3 ey = c[1] - c[2];
  box.size = Vec3(ex.norm(), ey.norm(), (c[4] - c[0]).norm());
  box.yaw = wrap_angle(std::atan2(ex.y(), ex.x()));
  return box;
}

void PointCloud::append(const PointCloud& other) {
  const bool keep_normals = (has_normals() || empty()) && other.has_normals();
  const bool keep_labels = (has_labels() || empty()) && other.has_labels();
  points.insert(points.end(), other.points.begin(), other.points.end());
  if (keep_normals) {
    normals.insert(normals.end(), other.normals.begin(), other.normals.end());
  } else {
    normals.clear();
  }
  if (keep_labels) {
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  } else {
    labels.clear();
  }
}

PointCloud PointCloud::transformed(const Pose3& t) const {
  PointCloud out;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(t.apply(p));
  if (has_normals()) {
    out.normals.reserve(normals.size());
    for (const auto& n : normals) out.normals.push_back(t.rotate(n));
  }
  out.labels = labels;
  return out;
}

PointCloud PointCloud::subset(const std::vector<std::size_t>& idx) const {
  PointCloud out;
  out.points.reserve(idx.size());
  for (auto i : idx) out.points.push_back(points[i]);
  if (has_normals()) {
    for (auto i : idx) out.normals.push_back(normals[i]);
  }
  if (has_labels()) {
    for (auto i : idx) out.labels.push_back(labels[i]);
  }
  return out;
}

void PointCloud::validate() const {
  if (has_normals()) {
    if (normals.size() != points.size()) throw Error("point cloud: normal count mismatch");
    for (const auto& n : normals) {
      if (std::abs(n.norm() - 1.0) > 1e-6) throw Error("point cloud: normal is not unit length");
    }
  }
  if (has_labels() && labels.size() != points.size()) {
    throw Error("point cloud: label count mismatch");
  }
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Sutherland–Hodgman: clip `subject` by each edge of the convex `clip`.
std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::vector<Vec2>& clip) {
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % m];
    const Vec2 edge = b - a;
    auto side = [&](const Vec2& p) { return cross2(edge, p - a); };

    std::vector<Vec2> out;
    out.reserve(subject.size() + 2);
    const std::size_t n = subject.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& cur = subject[i];
      const Vec2& nxt = subject[(i + 1) % n];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) out.push_back(cur);
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

void check_box(const OrientedBox3& b) {
  if (!(b.size.minCoeff() > 1e-9) || !b.size.allFinite() || !b.center.allFinite()) {
    throw Error("box_giou3d: degenerate box size");
  }
}

double intersection_volume(const OrientedBox3& a, const OrientedBox3& b) {
  const auto fa = a.footprint();
  const auto fb = b.footprint();
  const double area = convex_intersection_area({fa.begin(), fa.end()}, {fb.begin(), fb.end()});
  const double z_lo = std::max(a.center.z() - 0.5 * a.size.z(), b.center.z() - 0.5 * b.size.z());
  const double z_hi = std::min(a.center.z() + 0.5 * a.size.z(), b.center.z() + 0.5 * b.size.z());
  const double inter = area * std::max(0.0, z_hi - z_lo);
  return std::min(inter, std::min(a.volume(), b.volume()));
}

bool same_box(const OrientedBox3& a, const OrientedBox3& b) {
  return a.center == b.center && a.size == b.size && wrap_angle(a.yaw) == wrap_angle(b.yaw);
}

}  // namespace

double convex_intersection_area(const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
  const auto clipped = clip_convex(p, q);
  if (clipped.size() < 3) return 0.0;
  return std::abs(polygon_area(clipped));
}

double box_iou3d(const OrientedBox3& a, const OrientedBox3& b) {
  check_box(a);
  check_box(b);
  if (same_box(a, b)) return 1.0;
  const double inter = intersection_volume(a, b);
  return inter / (a.volume() + b.volume() - inter);
}

double box_giou3d(const OrientedBox3& a, const OrientedBox3& b) {
  check_box(a);
  check_box(b);
  if (same_box(a, b)) return 1.0;

  const double inter = intersection_volume(a, b);
  const double uni = a.volume() + b.volume() - inter;

  // Enclosing box in the frame of a.
  const Mat3 to_a = rot_z(-a.yaw);
  Aabb hull = Aabb::empty();
  for (const auto& c : a.corners()) hull.expand(to_a * c);
  for (const auto& c : b.corners()) hull.expand(to_a * c);
  const Vec3 ext = hull.extent();
  const double enclosing = std::max(ext.x() * ext.y() * ext.z(), uni);

  return inter / uni - (enclosing - uni) / enclosing;
}

std::optional<double> ray_aabb_hit(const Vec3& origin, const Vec3& dir, const Aabb& box) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (dir[i] == 0.0) {
      if (origin[i] < box.min[i] || origin[i] > box.max[i]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / dir[i];
    double t0 = (box.min[i] - origin[i]) * inv;
    double t1 = (box.max[i] - origin[i]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_exit < 0.0 || t_enter > t_exit) return std::nullopt;
  return std::max(t_enter, 0.0);
}

std::optional<double> ray_triangle_hit(const Vec3& origin, const Vec3& dir, const Triangle& tri) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = tri.b - tri.a;
  const Vec3 e2 = tri.c - tri.a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kEps) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = origin - tri.a;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qvec) * inv_det;
  if (t <= kEps) return std::nullopt;
  return t;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Triangle& tri) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3& a = tri.a;
  const Vec3& b = tri.b;
  const Vec3& c = tri.c;
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace oanav
