#include "oanav/geometry.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace oanav;

TEST(Angles, WrapIntoHalfOpenRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), -kPi);
  EXPECT_NEAR(wrap_angle(3.0 * kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_NEAR(wrap_angle(-0.5), -0.5, 1e-15);
  EXPECT_NEAR(angle_diff(0.1, 2.0 * kPi - 0.1), 0.2, 1e-12);
}

TEST(Angles, DistanceModuloPeriod) {
  EXPECT_NEAR(angle_dist_mod(0.1, 0.1 + kPi, kPi), 0.0, 1e-12);
  EXPECT_NEAR(angle_dist_mod(0.1, 0.1 + kPi, 2.0 * kPi), kPi, 1e-12);
  EXPECT_NEAR(angle_dist_mod(-3.1, 3.1, 2.0 * kPi), 2.0 * kPi - 6.2, 1e-12);
}

TEST(Pose, ComposeAndInverse) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const YawPose a{u(rng), u(rng), u(rng), u(rng)};
    const YawPose b{u(rng), u(rng), u(rng), u(rng)};
    const Pose3 ab = a.to_pose3() * b.to_pose3();
    const Vec3 p(u(rng), u(rng), u(rng));
    EXPECT_LT((ab.apply(p) - a.to_pose3().apply(b.to_pose3().apply(p))).norm(), 1e-12);
    EXPECT_LT((ab.inverse().apply(ab.apply(p)) - p).norm(), 1e-12);
    EXPECT_TRUE(ab.is_valid());
    const YawPose back = YawPose::from_pose3(ab);
    EXPECT_NEAR(angle_diff(back.yaw, a.yaw + b.yaw), 0.0, 1e-12);
  }
}

TEST(Box, CornersRoundTrip) {
  const OrientedBox3 b{Vec3(1.0, -2.0, 0.5), Vec3(0.6, 1.4, 1.0), 0.7};
  const OrientedBox3 r = OrientedBox3::from_corners(b.corners());
  EXPECT_LT((r.center - b.center).norm(), 1e-12);
  EXPECT_LT((r.size - b.size).norm(), 1e-12);
  EXPECT_NEAR(angle_diff(r.yaw, b.yaw), 0.0, 1e-12);
  const auto fp = b.footprint();
  EXPECT_NEAR(polygon_area({fp.begin(), fp.end()}), 0.6 * 1.4, 1e-12);
}

TEST(Box, ContainsRespectsYaw) {
  const OrientedBox3 b{Vec3::Zero(), Vec3(2.0, 0.2, 1.0), kPi / 2.0};
  EXPECT_TRUE(b.contains(Vec3(0.0, 0.9, 0.0)));
  EXPECT_FALSE(b.contains(Vec3(0.9, 0.0, 0.0)));
  EXPECT_TRUE(b.contains(Vec3(0.15, 0.0, 0.0), 0.1));
}

TEST(Polygon, IntersectionOfOffsetSquares) {
  const std::vector<Vec2> a{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const std::vector<Vec2> b{{1, 1}, {3, 1}, {3, 3}, {1, 3}};
  EXPECT_NEAR(convex_intersection_area(a, b), 1.0, 1e-12);
  const std::vector<Vec2> far{{5, 5}, {6, 5}, {6, 6}, {5, 6}};
  EXPECT_NEAR(convex_intersection_area(a, far), 0.0, 1e-12);
  // A diamond inscribed in the square covers half of it.
  const std::vector<Vec2> diamond{{1, 0}, {2, 1}, {1, 2}, {0, 1}};
  EXPECT_NEAR(convex_intersection_area(a, diamond), 2.0, 1e-12);
}

TEST(Giou, AxisAlignedClosedForm) {
  const OrientedBox3 a{Vec3(0.5, 0.5, 0.5), Vec3::Ones(), 0.0};
  const OrientedBox3 b{Vec3(1.0, 0.5, 0.5), Vec3::Ones(), 0.0};
  // Overlap 0.5, union 1.5, enclosing 1.5.
  EXPECT_NEAR(box_iou3d(a, b), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(box_giou3d(a, b), 1.0 / 3.0, 1e-12);
  const OrientedBox3 c{Vec3(3.5, 0.5, 0.5), Vec3::Ones(), 0.0};
  // Disjoint: union 2, enclosing 4.
  EXPECT_NEAR(box_giou3d(a, c), -0.5, 1e-12);
  EXPECT_EQ(box_giou3d(a, a), 1.0);
}

TEST(Giou, SymmetricUnderSwapForIou) {
  const OrientedBox3 a{Vec3(0.1, 0.2, 0.4), Vec3(1.0, 0.6, 0.8), 0.4};
  const OrientedBox3 b{Vec3(0.4, -0.1, 0.5), Vec3(0.7, 0.9, 0.8), -0.9};
  EXPECT_NEAR(box_iou3d(a, b), box_iou3d(b, a), 1e-12);
  EXPECT_LE(box_giou3d(a, b), box_iou3d(a, b));
  EXPECT_GE(box_giou3d(a, b), -1.0);
}

TEST(Giou, SymmetricWhenYawsAgreeModuloQuarterTurn) {
  const OrientedBox3 a{Vec3(0.1, 0.2, 0.4), Vec3(1.0, 0.6, 0.8), 0.4};
  for (const int k : {0, 1, 2, 3}) {
    const OrientedBox3 b{Vec3(0.9, -0.4, 0.5), Vec3(0.7, 0.9, 0.8), 0.4 + k * kPi / 2.0};
    EXPECT_NEAR(box_giou3d(a, b), box_giou3d(b, a), 1e-12);
  }
}

TEST(Rays, AabbAndTriangle) {
  const Aabb box{Vec3(1, -1, -1), Vec3(2, 1, 1)};
  EXPECT_NEAR(*ray_aabb_hit(Vec3::Zero(), Vec3::UnitX(), box), 1.0, 1e-12);
  EXPECT_FALSE(ray_aabb_hit(Vec3::Zero(), -Vec3::UnitX(), box));
  EXPECT_NEAR(*ray_aabb_hit(Vec3(1.5, 0, 0), Vec3::UnitX(), box), 0.0, 1e-12);

  const Triangle t{Vec3(2, -1, -1), Vec3(2, 1, -1), Vec3(2, 0, 1)};
  EXPECT_NEAR(*ray_triangle_hit(Vec3::Zero(), Vec3::UnitX(), t), 2.0, 1e-12);
  EXPECT_FALSE(ray_triangle_hit(Vec3::Zero(), Vec3::UnitY(), t));
  EXPECT_FALSE(ray_triangle_hit(Vec3(3, 0, 0), Vec3::UnitX(), t));
}

TEST(Triangle, ClosestPointMatchesDenseSampling) {
  const Triangle t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0.5)};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 10; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    double best = 1e9;
    const int n = 300;
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; a + b <= n; ++b) {
        const Vec3 q = t.a + (t.b - t.a) * a / n + (t.c - t.a) * b / n;
        best = std::min(best, (q - p).norm());
      }
    }
    EXPECT_NEAR((closest_point_on_triangle(p, t) - p).norm(), best, 5e-3);
  }
}

TEST(PointCloud, ValidateCatchesMismatch) {
  PointCloud c;
  c.push_back(Vec3::Zero(), 1);
  c.normals.push_back(Vec3::UnitZ());
  c.normals.push_back(Vec3::UnitZ());
  EXPECT_THROW(c.validate(), Error);
  PointCloud ok;
  ok.push_back(Vec3(1, 2, 3), 4);
  const PointCloud moved = ok.transformed(YawPose{1.0, 0.0, 0.0, kPi / 2}.to_pose3());
  EXPECT_LT((moved.points[0] - Vec3(-1.0, 1.0, 3.0)).norm(), 1e-12);
  EXPECT_EQ(moved.labels[0], 4);
}
