#include "oanav/detect.hpp"
#include "oanav/kdtree.hpp"
#include "oanav/lidar.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace oanav;

namespace {

// Labelled cloud with `n` points for each listed object id.
PointCloud labelled(const std::vector<int>& ids, int n) {
  PointCloud c;
  for (const int id : ids) {
    for (int i = 0; i < n; ++i) c.push_back(Vec3::Zero(), object_label(id));
  }
  return c;
}

Scene two_objects() {
  Scene s;
  s.bounds = {-10, -10, 10, 10};
  SceneObject a;
  a.pose = {2.0, 1.0, 0.0, 0.5};
  a.id = 0;
  SceneObject b;
  b.cls = ObjectClass::Table;
  b.pose = {-3.0, 0.0, 0.0, -1.0};
  b.id = 1;
  s.objects = {a, b};
  return s;
}

}  // namespace

TEST(Oracle, ExactNoiseReturnsTruthInSensorFrame) {
  const Scene s = two_objects();
  const Pose3 sensor = YawPose{0.5, -0.5, 0.55, 0.3}.to_pose3();
  std::mt19937_64 rng(1);
  const auto dets = detect_oracle(s, sensor, labelled({0, 1}, 40), OracleNoise::exact(), rng);
  ASSERT_EQ(dets.size(), 2u);
  for (const auto& d : dets) {
    const SceneObject* o = s.find(d.source_id);
    ASSERT_NE(o, nullptr);
    const OrientedBox3 truth = o->box();
    EXPECT_LT((sensor.apply(d.box.center) - truth.center).norm(), 1e-12);
    EXPECT_NEAR(angle_diff(d.box.yaw + 0.3, truth.yaw), 0.0, 1e-12);
    EXPECT_EQ(d.label, o->cls);
    EXPECT_DOUBLE_EQ(d.confidence, 1.0);
  }
  // Same call again gives identical boxes.
  const auto again = detect_oracle(s, sensor, labelled({0, 1}, 40), OracleNoise::exact(), rng);
  for (std::size_t i = 0; i < dets.size(); ++i) EXPECT_EQ(dets[i].box.center, again[i].box.center);
}

TEST(Oracle, MinPointsHidesSparseObjects) {
  const Scene s = two_objects();
  std::mt19937_64 rng(2);
  const auto dets = detect_oracle(s, Pose3::identity(), labelled({0}, 40), OracleNoise::exact(), rng);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].source_id, 0);
}

TEST(Oracle, YawNoiseSpreadWithoutFlips) {
  Scene s;
  s.bounds = {-10, -10, 10, 10};
  SceneObject a;
  a.pose = {2.0, 0.0, 0.0, 0.0};
  s.objects = {a};
  OracleNoise noise = OracleNoise::exact();
  noise.sigma_yaw = 0.1;
  std::mt19937_64 rng(3);
  const PointCloud c = labelled({0}, 40);
  double sum2 = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto d = detect_oracle(s, Pose3::identity(), c, noise, rng);
    sum2 += d[0].box.yaw * d[0].box.yaw;
  }
  EXPECT_NEAR(std::sqrt(sum2 / n), 0.1, 0.003);
}

TEST(Oracle, FlipsAreQuarterTurns) {
  Scene s;
  s.bounds = {-10, -10, 10, 10};
  SceneObject a;
  a.pose = {2.0, 0.0, 0.0, 0.0};
  s.objects = {a};
  OracleNoise noise = OracleNoise::exact();
  noise.p_flip = 1.0;
  std::mt19937_64 rng(4);
  std::set<long> seen;
  for (int i = 0; i < 200; ++i) {
    const auto d = detect_oracle(s, Pose3::identity(), labelled({0}, 40), noise, rng);
    const double q = d[0].box.yaw / (kPi / 2.0);
    EXPECT_NEAR(q, std::round(q), 1e-9);
    EXPECT_NE(std::lround(q), 0);
    seen.insert(std::lround(q));
  }
  EXPECT_EQ(seen.size(), 3u);
}

TEST(Detection, MakeNormalizesScores) {
  const Detection d = Detection::make(OrientedBox3{}, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(d.class_scores[1], 0.75);
  EXPECT_EQ(d.label, ObjectClass::Table);
  EXPECT_DOUBLE_EQ(d.confidence, 0.75);
  EXPECT_THROW(Detection::make(OrientedBox3{}, {0.0, 0.0}), Error);
}

TEST(Dbscan, SeparatesBlobsAndNoise) {
  std::vector<Vec3> pts;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.05);
  for (int i = 0; i < 100; ++i) pts.emplace_back(g(rng), g(rng), g(rng));
  for (int i = 0; i < 100; ++i) pts.emplace_back(3.0 + g(rng), g(rng), g(rng));
  pts.emplace_back(10.0, 10.0, 10.0);
  const auto labels = dbscan(pts, 0.2, 5);
  EXPECT_EQ(labels.back(), -1);
  for (int i = 1; i < 100; ++i) EXPECT_EQ(labels[i], labels[0]);
  for (int i = 101; i < 200; ++i) EXPECT_EQ(labels[i], labels[100]);
  EXPECT_NE(labels[0], labels[100]);
  const auto groups = clusters_from_labels(labels);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].size() + groups[1].size(), 200u);
}

TEST(Dbscan, MatchesBruteForceCoreCount) {
  std::vector<Vec3> pts;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 300; ++i) pts.emplace_back(u(rng), u(rng), 0.0);
  const auto labels = dbscan(pts, 0.15, 4);
  // Core points (brute force) are never noise.
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int n = 0;
    for (const auto& q : pts) n += (q - pts[i]).norm() <= 0.15;
    if (n >= 4) EXPECT_GE(labels[i], 0);
  }
}

TEST(Pca, RecoversRotatedRectangle) {
  std::vector<Vec3> pts;
  const double yaw = 0.6;
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 10; ++j) {
      for (const double z : {0.0, 0.8}) {
        const Vec3 l(-1.0 + 2.0 * i / 40, -0.25 + 0.5 * j / 10, z);
        pts.push_back(rot_z(yaw) * l + Vec3(1.0, 2.0, 0.0));
      }
    }
  }
  const OrientedBox3 b = pca_box(pts);
  EXPECT_NEAR(angle_dist_mod(b.yaw, yaw, kPi), 0.0, 1e-9);
  EXPECT_LT(b.yaw, kPi / 2.0);
  EXPECT_GE(b.yaw, -kPi / 2.0);
  EXPECT_NEAR(b.size.x(), 2.0, 1e-9);
  EXPECT_NEAR(b.size.y(), 0.5, 1e-9);
  EXPECT_NEAR(b.size.z(), 0.8, 1e-9);
  EXPECT_LT((b.center - Vec3(1.0, 2.0, 0.4)).norm(), 1e-9);
  const std::vector<Vec3> same(5, Vec3(1, 1, 1));
  EXPECT_EQ(pca_box(same).yaw, 0.0);
}

TEST(ClusterDetector, NominalSizesScoreTheirClass) {
  for (const auto cls : {ObjectClass::Chair, ObjectClass::Table}) {
    const OrientedBox3 b{Vec3::Zero(), nominal_size(cls, 0), 0.0};
    const ClassScores s = size_class_scores(b);
    EXPECT_GT(s[static_cast<int>(cls)], s[1 - static_cast<int>(cls)]);
  }
}

TEST(ClusterDetector, FindsScannedChair) {
  Scene s;
  s.bounds = {-10, -10, 10, 10};
  SceneObject chair;
  chair.pose = {2.5, 0.0, 0.0, 0.0};
  s.objects = {chair};
  LidarConfig cfg;
  std::mt19937_64 rng(7);
  const Pose3 sensor = sensor_pose_for({}, cfg);
  PointCloud cloud;
  for (int w = 0; w < 3; ++w) cloud.append(scan(s, sensor, cfg, rng));
  const PointCloud objects = filter_cloud(cloud, detect_ground(cloud).plane);
  const auto dets = detect_cluster(objects);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].label, ObjectClass::Chair);
  EXPECT_LT((sensor.apply(dets[0].box.center).head<2>() - Vec2(2.5, 0.0)).norm(), 0.2);
}

TEST(KdTree, MatchesBruteForce) {
  std::vector<Vec3> pts;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const KdTree3 tree(pts);
  for (int t = 0; t < 50; ++t) {
    const Vec3 q(u(rng), u(rng), u(rng));
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if ((pts[i] - q).squaredNorm() < (pts[best] - q).squaredNorm()) best = i;
    }
    const auto nn = tree.nearest(q, 10.0);
    ASSERT_TRUE(nn);
    EXPECT_EQ(nn->index, best);
    std::vector<std::size_t> got;
    tree.radius(q, 0.3, got);
    std::size_t expect = 0;
    for (const auto& p : pts) expect += (p - q).norm() <= 0.3;
    EXPECT_EQ(got.size(), expect);
  }
  EXPECT_FALSE(tree.nearest(Vec3(5, 5, 5), 0.1));

  std::vector<char> mask(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) mask[i] = pts[i].z() > 0.0;
  for (int t = 0; t < 50; ++t) {
    const Vec3 q(u(rng), u(rng), u(rng));
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (mask[i] && (!best || (pts[i] - q).squaredNorm() < (pts[*best] - q).squaredNorm())) best = i;
    }
    const auto nn = tree.nearest(q, 10.0, mask);
    ASSERT_TRUE(nn);
    EXPECT_EQ(nn->index, *best);
  }
  EXPECT_THROW(tree.nearest(Vec3::Zero(), 1.0, std::vector<char>(3, 1)), Error);
}

TEST(DetectionCsv, Format) {
  std::ostringstream out;
  write_detection_header(out);
  const Detection d = Detection::make(OrientedBox3{Vec3(1, 2, 3), Vec3(0.5, 0.5, 0.9), 0.25}, {1.0, 0.0});
  write_detections(out, 4, std::vector{d});
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "frame,x,y,z,sx,sy,sz,yaw,label,confidence");
  EXPECT_NE(s.find("\n4,"), std::string::npos);
  EXPECT_NE(s.find("chair"), std::string::npos);
}
