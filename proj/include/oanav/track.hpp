#pragma once

#include "oanav/detect.hpp"
#include "oanav/icp.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

namespace oanav {

/// [x, y, z, yaw, sx, sy, sz, vx, vy, vz]; position is the box center.
using StateVec = Eigen::Matrix<double, 10, 1>;
using StateCov = Eigen::Matrix<double, 10, 10>;
/// [x, y, z, yaw, sx, sy, sz]
using MeasVec = Eigen::Matrix<double, 7, 1>;
using MeasCov = Eigen::Matrix<double, 7, 7>;

/// Constant-velocity prediction. Q is scaled by dt.
void kf_predict(StateVec& x, StateCov& P, double dt, const StateCov& Q);
/// Joseph-form update. The yaw innovation is wrapped modulo `yaw_period`.
void kf_update(StateVec& x, StateCov& P, const MeasVec& z, const MeasCov& R, double yaw_period = 2.0 * kPi);

struct TrackerConfig {
  double giou_min = -0.5;
  int max_misses = 5;
  double p_exist_min = 0.5;
  int occlusion_rays = 9;
  double occlusion_fraction = 2.0 / 3.0;
  double duplicate_giou = 0.7;
  /// Tracks farther than this from the sensor are neither matched nor penalized.
  double valid_range = 8.0;

  double q_pos = 1e-4;
  double q_yaw = 1e-4;
  double q_scale = 1e-6;
  double q_vel = 1e-4;
  double r_pos = 0.05 * 0.05;
  double r_yaw = 0.05 * 0.05;
  /// Small: the accepted CAD fit certifies the dimensions.
  double r_scale = 1e-4;
  double p0_pos = 0.05 * 0.05;
  double p0_yaw = 0.05 * 0.05;
  double p0_scale = 1e-4;
  double p0_vel = 0.01;

  StateCov process_noise() const;
  MeasCov measurement_noise() const;
};

struct ObjectTrack {
  int id = 0;
  StateVec x = StateVec::Zero();
  StateCov P = StateCov::Identity();
  ClassScores class_sum{};
  int k = 0;
  ObjectClass label = ObjectClass::Chair;
  double confidence = 0.0;
  double p_exist_sum = 0.0;
  int p_exist_count = 0;
  double p_exist = 0.0;
  int misses = 0;
  ObjectClass cad = ObjectClass::Chair;
  int birth_frame = 0;
  int updates = 0;

  OrientedBox3 box() const;
  /// Object base pose (footprint center on the ground) in the world frame.
  YawPose pose() const;
  ClassScores class_mean() const;

  /// Semantic and existence fusion: running means of per-frame values.
  void add_class_scores(const ClassScores& s);
  void add_existence(double p);
};

/// Minimum-cost assignment for a rectangular cost matrix. Returns, for each
/// row, the assigned column or -1 when there are more rows than columns.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_dets;
};

/// Maximizes total GIoU over one-to-one pairings, then drops pairs below giou_min.
Association associate(std::span<const OrientedBox3> tracks, std::span<const OrientedBox3> dets, double giou_min);

/// True when at least `fraction` of rays from `origin` towards points on
/// `target` are blocked by any of `others` before reaching it.
bool occlusion_check(const OrientedBox3& target, std::span<const OrientedBox3> others, const Vec3& origin,
                     int n_rays = 9, double fraction = 2.0 / 3.0);

/// World-frame measurement of a verified detection seen from `sensor_pose`.
struct WorldDetection {
  OrientedBox3 box;
  VerifiedDetection source;
};
WorldDetection to_world(const VerifiedDetection& v, const Pose3& sensor_pose);

class Tracker {
 public:
  struct Events {
    std::vector<int> born;
    std::vector<int> updated;
    std::vector<int> occluded;
    std::vector<int> removed;
  };

  explicit Tracker(TrackerConfig cfg = {});

  Events step(std::span<const VerifiedDetection> dets, const Pose3& sensor_pose, int frame, double dt);

  const std::unordered_map<int, ObjectTrack>& tracks() const { return tracks_; }
  /// Copy of the live tracks ordered by id.
  std::vector<ObjectTrack> snapshot() const;
  const TrackerConfig& config() const { return cfg_; }

 private:
  ObjectTrack spawn(const WorldDetection& d, int frame);
  void update(ObjectTrack& t, const WorldDetection& d);
  std::vector<int> sorted_ids() const;

  TrackerConfig cfg_;
  std::unordered_map<int, ObjectTrack> tracks_;
  int next_id_ = 0;
};

/// CSV: frame,id,class,x,y,yaw,p_exist,s_c
void write_track_header(std::ostream& out);
void write_tracks(std::ostream& out, int frame, std::span<const ObjectTrack> tracks);

}  // namespace oanav
