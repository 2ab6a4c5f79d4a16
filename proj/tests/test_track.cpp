#include "oanav/track.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

using namespace oanav;

namespace {

VerifiedDetection verified(const Vec3& center, double yaw, double p_exist = 1.0) {
  VerifiedDetection v;
  v.box = {center, nominal_size(ObjectClass::Chair, 0), yaw};
  v.pose = {center.x(), center.y(), center.z() - 0.5 * v.box.size.z(), yaw};
  v.p_exist = p_exist;
  v.detection = Detection::make(v.box, {0.9, 0.1});
  return v;
}

}  // namespace

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 30; ++t) {
    const int rows = 1 + t % 5, cols = 1 + (t / 5) % 5;
    Eigen::MatrixXd c(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) c(i, j) = u(rng);
    }
    const auto a = hungarian(c);
    ASSERT_EQ(static_cast<int>(a.size()), rows);
    double got = 0.0;
    std::vector<int> used;
    for (int i = 0; i < rows; ++i) {
      if (a[i] >= 0) {
        got += c(i, a[i]);
        used.push_back(a[i]);
      }
    }
    std::sort(used.begin(), used.end());
    EXPECT_EQ(std::adjacent_find(used.begin(), used.end()), used.end());
    EXPECT_EQ(static_cast<int>(used.size()), std::min(rows, cols));

    // Brute force over column permutations.
    std::vector<int> perm(std::max(rows, cols));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (int i = 0; i < rows; ++i) {
        if (perm[i] < cols) s += c(i, perm[i]);
      }
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(got, best, 1e-9);
  }
}

TEST(Associate, ThresholdAndPairing) {
  const Vec3 size(0.5, 0.5, 0.9);
  const std::vector<OrientedBox3> tracks{{Vec3(0, 0, 0.45), size, 0.0}, {Vec3(3, 0, 0.45), size, 0.0}};
  const std::vector<OrientedBox3> dets{{Vec3(3.05, 0, 0.45), size, 0.1}, {Vec3(10, 10, 0.45), size, 0.0}};
  const Association a = associate(tracks, dets, -0.5);
  ASSERT_EQ(a.matches.size(), 1u);
  EXPECT_EQ(a.matches[0], std::make_pair(1, 0));
  EXPECT_EQ(a.unmatched_tracks, std::vector<int>{0});
  EXPECT_EQ(a.unmatched_dets, std::vector<int>{1});
  EXPECT_TRUE(associate({}, dets, -0.5).matches.empty());
}

TEST(Occlusion, WallBetweenSensorAndTarget) {
  const OrientedBox3 target{Vec3(4, 0, 0.45), Vec3(0.5, 0.5, 0.9), 0.0};
  const std::vector<OrientedBox3> blocker{{Vec3(2, 0, 1.0), Vec3(0.2, 3.0, 2.0), 0.0}};
  EXPECT_TRUE(occlusion_check(target, blocker, Vec3(0, 0, 0.55)));
  EXPECT_FALSE(occlusion_check(target, blocker, Vec3(4, -3, 0.55)));
  EXPECT_FALSE(occlusion_check(target, {}, Vec3(0, 0, 0.55)));
  // A box behind the target does not occlude it.
  const std::vector<OrientedBox3> behind{{Vec3(6, 0, 1.0), Vec3(0.2, 3.0, 2.0), 0.0}};
  EXPECT_FALSE(occlusion_check(target, behind, Vec3(0, 0, 0.55)));
}

TEST(Kalman, PredictMovesByVelocity) {
  StateVec x = StateVec::Zero();
  x(7) = 1.0;
  x(8) = -2.0;
  StateCov P = StateCov::Identity() * 0.1;
  kf_predict(x, P, 0.5, StateCov::Zero());
  EXPECT_DOUBLE_EQ(x(0), 0.5);
  EXPECT_DOUBLE_EQ(x(1), -1.0);
  EXPECT_NEAR(P(0, 0), 0.1 + 0.25 * 0.1, 1e-15);
  EXPECT_NEAR(P(0, 7), 0.05, 1e-15);
}

TEST(Kalman, YawInnovationIsWrapped) {
  StateVec x = StateVec::Zero();
  x(3) = kPi - 0.05;
  StateCov P = StateCov::Identity();
  MeasVec z = MeasVec::Zero();
  z(3) = -kPi + 0.05;
  kf_update(x, P, z, MeasCov::Identity());
  // Halfway between along the short arc, not through zero.
  EXPECT_NEAR(std::abs(wrap_angle(x(3))), kPi, 1e-9);
  x(3) = 0.2;
  z(3) = 0.2 + kPi;
  kf_update(x, P, z, MeasCov::Identity(), kPi);
  EXPECT_NEAR(angle_dist_mod(x(3), 0.2, kPi), 0.0, 1e-9);
}

TEST(Track, FusionIsRunningMean) {
  ObjectTrack t;
  t.add_class_scores({0.9, 0.1});
  t.add_class_scores({0.2, 0.8});
  t.add_class_scores({0.2, 0.8});
  EXPECT_NEAR(t.class_mean()[0], 1.3 / 3.0, 1e-15);
  EXPECT_EQ(t.label, ObjectClass::Table);
  t.add_existence(1.0);
  t.add_existence(0.5);
  t.add_existence(0.0);
  EXPECT_NEAR(t.p_exist, 0.5, 1e-15);
}

TEST(Tracker, BirthUpdateAndDeath) {
  TrackerConfig cfg;
  Tracker tr(cfg);
  const Pose3 sensor = Pose3::identity();
  const std::vector<VerifiedDetection> one{verified(Vec3(2, 0, 0.45), 0.3)};
  auto ev = tr.step(one, sensor, 0, 0.1);
  ASSERT_EQ(ev.born.size(), 1u);
  const int id = ev.born[0];
  for (int f = 1; f < 4; ++f) {
    ev = tr.step(one, sensor, f, 0.1);
    EXPECT_EQ(ev.updated, std::vector<int>{id});
  }
  EXPECT_EQ(tr.tracks().at(id).k, 4);
  EXPECT_LT(std::hypot(tr.tracks().at(id).pose().x - 2.0, tr.tracks().at(id).pose().y), 1e-3);
  // Missing in view: existence decays and the track goes away.
  int frame = 4;
  while (!tr.tracks().empty() && frame < 40) tr.step({}, sensor, frame++, 0.1);
  EXPECT_TRUE(tr.tracks().empty());
  EXPECT_LE(frame - 4, cfg.max_misses + 1);
}

TEST(Tracker, OutOfRangeTracksAreKept) {
  Tracker tr;
  const std::vector<VerifiedDetection> one{verified(Vec3(2, 0, 0.45), 0.0)};
  tr.step(one, Pose3::identity(), 0, 0.1);
  const Pose3 far = YawPose{30.0, 0.0, 0.0, 0.0}.to_pose3();
  for (int f = 1; f < 20; ++f) tr.step({}, far, f, 0.1);
  EXPECT_EQ(tr.tracks().size(), 1u);
}

TEST(Tracker, ToWorldUsesSensorPose) {
  const VerifiedDetection v = verified(Vec3(1, 0, 0.45), 0.0);
  const Pose3 sensor = YawPose{1.0, 2.0, 0.55, kPi / 2.0}.to_pose3();
  const WorldDetection w = to_world(v, sensor);
  EXPECT_LT((w.box.center.head<2>() - Vec2(1.0, 3.0)).norm(), 1e-12);
  EXPECT_NEAR(angle_diff(w.box.yaw, kPi / 2.0), 0.0, 1e-12);
}

TEST(TrackCsv, Header) {
  std::ostringstream out;
  write_track_header(out);
  EXPECT_EQ(out.str(), "frame,id,class,x,y,yaw,p_exist,s_c\n");
}
