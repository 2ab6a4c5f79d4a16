#pragma once

#include "oanav/geometry.hpp"
#include "oanav/scene.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <span>

namespace oanav {

inline constexpr double kDeg = kPi / 180.0;

struct LidarConfig {
  int n_beams = 32;
  double fov_lower = -25.0 * kDeg;
  double fov_upper = 15.0 * kDeg;
  double horizontal_step = 0.4 * kDeg;
  double max_range = 30.0;
  double range_noise_sigma = 0.01;
  double rate = 10.0;
  /// Sensor origin above the robot base.
  double mount_height = 0.55;

  void validate() const;
};

/// Point labels written by the simulator.
inline constexpr int kLabelGround = 0;
inline constexpr int kLabelWall = 1;
inline constexpr int kLabelObjectBase = 16;
inline int object_label(int id) { return kLabelObjectBase + id; }

/// Precomputed ray-casting acceleration data for one scene.
class RayCaster {
 public:
  explicit RayCaster(const Scene& scene, bool include_ground = true);

  struct Hit {
    double range;
    int label;
  };
  /// Nearest hit along a unit world-frame ray within max_range.
  std::optional<Hit> cast(const Vec3& origin, const Vec3& dir, double max_range) const;

 private:
  struct Part {
    Aabb box;
    std::vector<Triangle> triangles;
  };
  struct Model {
    std::vector<Part> parts;
  };
  struct Placed {
    const Model* model;
    Pose3 world_to_local;
    Aabb world_box;
    int label;
  };

  std::vector<Aabb> walls_;
  std::map<std::pair<int, std::uint64_t>, std::unique_ptr<Model>> models_;
  std::vector<Placed> objects_;
  bool ground_;
};

/// One sweep in the sensor frame. Misses are dropped; hits get Gaussian
/// range noise. Labels identify ground, wall or object instance.
PointCloud scan(const Scene& scene, const Pose3& sensor_pose, const LidarConfig& cfg, std::mt19937_64& rng);
PointCloud scan(const RayCaster& caster, const Pose3& sensor_pose, const LidarConfig& cfg, std::mt19937_64& rng);

/// Sensor pose for a robot at `base` on the ground.
Pose3 sensor_pose_for(const YawPose& base, const LidarConfig& cfg);

struct Keyframe {
  Pose3 pose;  // sensor to world
  PointCloud cloud;
  int frame_index = 0;
};

/// All frames re-expressed in the frame of the last one and concatenated.
PointCloud accumulate(std::span<const Keyframe> frames);

/// Sliding window of the most recent W frames.
class Accumulator {
 public:
  explicit Accumulator(std::size_t window = 5);

  void push(Keyframe frame);
  PointCloud cloud() const;
  const Keyframe& latest() const;
  std::size_t size() const { return frames_.size(); }
  void clear() { frames_.clear(); }

 private:
  std::size_t window_;
  std::deque<Keyframe> frames_;
};

struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  /// Signed distance, positive on the normal side.
  double distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

struct GroundConfig {
  int iterations = 200;
  double inlier_dist = 0.05;
  double min_inlier_ratio = 0.10;
  /// Hypotheses whose normal leans further than this from +z are skipped.
  double max_tilt_deg = 30.0;
  std::uint64_t seed = 7;
};

struct GroundFit {
  Plane plane;
  std::size_t inliers = 0;
};

/// RANSAC plane with least-squares refinement on the inliers. The normal is
/// oriented towards +z of the cloud frame.
GroundFit detect_ground(const PointCloud& cloud, const GroundConfig& cfg = {});

/// Keeps points strictly above the ground band and at most `ceiling_height`
/// above the plane.
PointCloud filter_cloud(const PointCloud& cloud, const Plane& ground, double ceiling_height = 2.2,
                        double inlier_dist = 0.05);

void write_oapc(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_oapc(const std::filesystem::path& path);
void write_xyz(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace oanav
