#pragma once

#include "oanav/icp.hpp"
#include "oanav/lidar.hpp"
#include "oanav/scene.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oanav {

enum class Category : int { Ground = 0, Permanent = 1, Movable = 2, Dynamic = 3 };
std::string to_string(Category c);

/// Semantic label per point: -1 for none, otherwise an ObjectClass value.
inline constexpr int kNoSemantic = -1;
inline constexpr int kNoInstance = -1;

struct AnnotateConfig {
  GroundConfig ground{.inlier_dist = 0.03};
  double voxel = 0.1;
  /// Neighbourhood (in voxels) searched in the other sessions before a voxel counts as changed.
  int voxel_tolerance = 1;
  double cluster_eps = 0.5;
  std::size_t cluster_min_pts = 8;
  std::size_t min_cluster = 50;
  double dist_thresh = 0.05;
  /// Session clouds are merged from many scan poses, so no back-face culling.
  IcpConfig icp = [] {
    IcpConfig c;
    c.viewpoint.reset();
    return c;
  }();

  void validate() const;
};

/// Ground from a RANSAC plane over all sessions, then voxel occupancy
/// diffing: voxels seen in every session are Permanent, the rest Movable.
/// Returns one category vector per session.
std::vector<std::vector<Category>> classify_movable(std::span<const PointCloud> sessions,
                                                    const AnnotateConfig& cfg = {});

/// DBSCAN clusters (index lists into `points`) of at least `min_cluster` points.
std::vector<std::vector<std::size_t>> cluster_movable(std::span<const Vec3> points, const AnnotateConfig& cfg = {});

struct Alignment {
  ObjectClass cls = ObjectClass::Chair;
  YawPose pose;
  OrientedBox3 box;
  double residual = 0.0;
  double inlier_ratio = 0.0;
};

/// ICP from each quarter-turn of `init` (or `init` alone when candidates are
/// disabled). The best fit must pass the residual and inlier gates; the box
/// takes the model's nominal size.
std::optional<Alignment> align_cad(const PointCloud& cluster, const ModelIndex& model, const OrientedBox3& init,
                                   const IcpConfig& cfg = {});

/// True for points within `dist_thresh` of the model surface placed at `pose`.
std::vector<bool> label_points(std::span<const Vec3> points, const CadModel& model, const YawPose& pose,
                               double dist_thresh = 0.05);

struct ManualBox {
  int session = 0;
  OrientedBox3 box;
  std::optional<ObjectClass> cls;
};
std::vector<ManualBox> load_manual_boxes(const std::filesystem::path& path);

struct Instance {
  int id = 0;
  int session = 0;
  bool aligned = false;
  bool manual = false;
  std::optional<ObjectClass> cls;
  YawPose pose;
  OrientedBox3 box;
  double residual = 0.0;
  std::size_t n_points = 0;
};

struct SessionLabels {
  std::vector<Category> category;
  std::vector<int> semantic;
  std::vector<int> instance;
};

struct Annotation {
  std::vector<SessionLabels> sessions;
  std::vector<Instance> instances;
};

/// Full labelling pass over world-frame session clouds. `models` supplies one CAD model per class.
Annotation annotate(std::span<const PointCloud> sessions, const CadDatabase& models, const AnnotateConfig& cfg = {},
                    std::span<const ManualBox> manual = {});

nlohmann::json annotation_to_json(const Annotation& a, const std::vector<std::string>& session_names);
void save_annotation(const Annotation& a, const std::vector<std::string>& session_names,
                     const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic multi-session data

struct SessionSetConfig {
  SceneConfig scene;
  int n_sessions = 2;
  /// Scan positions form a grid of this many columns and rows.
  int grid_cols = 3;
  int grid_rows = 3;
  /// Minimum footprint distance between an object and any object of an earlier session.
  double move_clearance = 0.2;
  LidarConfig lidar;
  int max_retries = 400;

  SessionSetConfig();
};

struct SessionSet {
  std::vector<Scene> scenes;
  /// World-frame clouds with simulator labels.
  std::vector<PointCloud> clouds;
  std::vector<YawPose> scan_poses;
};

/// Same room, objects rearranged between sessions, each scanned from a common set of poses.
SessionSet make_sessions(const SessionSetConfig& cfg);

/// Simulator category of a label (objects move between sessions, so they are Movable).
Category category_of_label(int label);

}  // namespace oanav
