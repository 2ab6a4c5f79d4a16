#pragma once

#include "oanav/affordance.hpp"
#include "oanav/geometry.hpp"
#include "oanav/scene.hpp"

#include <array>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace oanav {

using ClassScores = std::array<double, kNumClasses>;

/// One detector output, boxes in the sensor frame.
struct Detection {
  OrientedBox3 box;
  ClassScores class_scores{1.0, 0.0};
  ObjectClass label = ObjectClass::Chair;
  double confidence = 1.0;
  /// Ground-truth instance for oracle detections, -1 otherwise.
  int source_id = -1;

  /// Normalizes the scores and derives label/confidence from them.
  static Detection make(const OrientedBox3& box, const ClassScores& scores, int source_id = -1);
};

struct OracleNoise {
  double sigma_center = 0.05;
  double sigma_size = 0.05;
  double sigma_yaw = 0.1;
  double p_flip = 0.2;
  double p_miss = 0.1;
  double p_fp = 0.05;
  std::size_t min_points = 30;
  double max_range = 15.0;
  /// Mean score mass given to the wrong class.
  double class_eps = 0.1;

  static OracleNoise exact();
};

/// Simulated network: ground-truth boxes perturbed by `noise`. Visibility is
/// judged by the number of cloud points labelled with each instance (or, for
/// unlabelled clouds, the points inside its box).
std::vector<Detection> detect_oracle(const Scene& scene, const Pose3& sensor_pose, const PointCloud& cloud,
                                     const OracleNoise& noise, std::mt19937_64& rng);

/// Density-based clustering; returns a cluster id per point, -1 for noise.
std::vector<int> dbscan(std::span<const Vec3> points, double eps, std::size_t min_pts);
/// Groups dbscan labels into index lists ordered by cluster id.
std::vector<std::vector<std::size_t>> clusters_from_labels(const std::vector<int>& labels);

/// Oriented box from the principal xy axis; yaw is returned in [-pi/2, pi/2).
/// Collinear or coincident clusters fall back to yaw 0.
OrientedBox3 pca_box(std::span<const Vec3> points);

struct ClusterConfig {
  double eps = 0.5;
  std::size_t min_pts = 10;
  std::size_t min_cluster = 30;
  /// Length scale of the size-similarity softmax.
  double size_scale = 0.2;
};

/// Class scores from how well a box matches each class's nominal size.
ClassScores size_class_scores(const OrientedBox3& box, double size_scale = 0.2);

/// Geometric detector for ground-removed clouds.
std::vector<Detection> detect_cluster(const PointCloud& cloud, const ClusterConfig& cfg = {});

/// CSV: frame,x,y,z,sx,sy,sz,yaw,label,confidence
void write_detection_header(std::ostream& out);
void write_detections(std::ostream& out, int frame, std::span<const Detection> dets);

}  // namespace oanav
