#pragma once

#include "oanav/detect.hpp"
#include "oanav/kdtree.hpp"
#include "oanav/scene.hpp"

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace oanav {

struct IcpConfig {
  /// Scan subsampling strides, coarse to fine.
  std::vector<int> levels{4, 2, 1};
  std::vector<double> corr_max_dist{0.5, 0.25, 0.1};
  /// A level ends once an accepted step moves less than this (m and rad).
  std::vector<double> step_tol{1e-2, 1e-2, 1e-3};
  int max_iters = 20;
  double cauchy_scale = 0.05;
  double e_min = 0.01;
  double e_max = 0.10;
  /// Accepted fits need at least this fraction of scan points matched at the finest gate.
  double min_inlier_ratio = 0.3;
  std::size_t max_points = 1000;
  double crop_scale = 1.2;
  bool use_orientation_candidates = true;
  /// Sensor origin in the scan frame. Model samples facing away from it are
  /// not matched. Unset for clouds merged from several viewpoints.
  std::optional<Vec3> viewpoint = Vec3::Zero();

  void validate() const;
};

/// CAD model plus a search tree over its surface samples.
struct ModelIndex {
  explicit ModelIndex(CadModel m);
  CadModel model;
  KdTree3 tree;
};

/// Read-only model database keyed by class.
class CadDatabase {
 public:
  CadDatabase();
  explicit CadDatabase(std::vector<CadModel> models);
  const ModelIndex& get(ObjectClass cls) const;

 private:
  std::vector<std::shared_ptr<const ModelIndex>> by_class_;
};

struct IcpStep {
  double cost_before;
  double cost_after;
};

struct IcpResult {
  YawPose pose;
  double residual = 0.0;
  int iterations = 0;
  double inlier_ratio = 0.0;
  std::vector<IcpStep> trace;
};

/// Correction increment xi = (yaw, tx, ty, tz) applied to scan points about
/// a pivot c: dT(xi) p = Rz(yaw) (p - c) + c + t.
using Xi = Eigen::Vector4d;

Vec3 apply_increment(const Xi& xi, const Vec3& pivot, const Vec3& p);

/// Point-to-plane residual n . (q - dT(xi) p) for a model point q with
/// normal n (both already in the sensor frame) and its analytic gradient.
double point_plane_residual(const Xi& xi, const Vec3& pivot, const Vec3& q, const Vec3& n, const Vec3& p);
Eigen::RowVector4d point_plane_jacobian(const Xi& xi, const Vec3& pivot, const Vec3& n, const Vec3& p);

/// Robust point-to-plane ICP over yaw and translation. Throws on too few
/// points, empty correspondence sets or a non-finite update.
IcpResult icp_refine(const ModelIndex& model, const PointCloud& scan, const YawPose& init, const IcpConfig& cfg = {});
IcpResult icp_refine(const CadModel& model, const PointCloud& scan, const YawPose& init, const IcpConfig& cfg = {});

/// Ranking used among candidate fits: residual plus the unmatched fraction
/// charged at the finest gate.
double fit_score(const IcpResult& fit, const IcpConfig& cfg);

/// ICP from each quarter-turn of `init` (init alone when candidates are
/// disabled). Fits that throw are skipped; none when every one does.
std::optional<IcpResult> icp_candidates(const ModelIndex& model, const PointCloud& scan, const YawPose& init,
                                        const IcpConfig& cfg = {});

/// Mean gated distance from scan points to model samples at `pose`.
double orientation_residual(const ModelIndex& model, std::span<const Vec3> scan, const YawPose& pose, double gate);

/// Picks the least-residual yaw among pose0.yaw + k pi/2, k = 0..3.
YawPose best_orientation_init(const ModelIndex& model, const PointCloud& scan, const YawPose& pose0,
                              double gate = 0.5);
YawPose best_orientation_init(const CadModel& model, const PointCloud& scan, const YawPose& pose0, double gate = 0.5);

/// Existence probability from the fit residual, clamped to [0.5, 1].
double existence_probability(double e_icp, double e_min, double e_max);

struct VerifiedDetection {
  YawPose pose;  // object to sensor
  OrientedBox3 box;
  double e_icp = 0.0;
  double p_exist = 0.0;
  int iterations = 0;
  Detection detection;
};

/// Points of `cloud` inside the detection box grown by `scale`.
PointCloud crop_to_box(const PointCloud& cloud, const OrientedBox3& box, double scale);

/// Crop, ICP over the orientation candidates and the residual gate. Returns none for
/// rejected detections (including ICP failures).
std::optional<VerifiedDetection> verify(const Detection& det, const PointCloud& cloud, const CadDatabase& models,
                                        const IcpConfig& cfg = {});

}  // namespace oanav
