#pragma once

#include "oanav/affordance.hpp"
#include "oanav/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oanav {

/// Procedural furniture model in its canonical frame: origin at the
/// footprint center on the ground, +x forward (the side a person sits on).
struct CadModel {
  ObjectClass cls = ObjectClass::Chair;
  std::uint64_t seed = 0;
  std::vector<Triangle> mesh;
  /// Cuboid parts the mesh was built from; used for ray culling.
  std::vector<Aabb> parts;
  /// Dense surface samples with outward normals.
  PointCloud samples;
  Vec3 nominal_size = Vec3::Zero();

  Aabb bounds() const;
  double surface_area() const;
};

inline constexpr double kModelSampleDensity = 2500.0;  // points per m^2
inline constexpr std::size_t kMinModelSamples = 2000;

CadModel make_chair(std::uint64_t seed);
CadModel make_table(std::uint64_t seed);
CadModel make_model(ObjectClass cls, std::uint64_t seed);
/// Nominal AABB size of make_model(cls, seed) without building the mesh.
Vec3 nominal_size(ObjectClass cls, std::uint64_t seed);

/// Area-weighted uniform samples with per-triangle normals. The count is
/// round(total_area * density).
PointCloud sample_surface(std::span<const Triangle> mesh, double density, std::uint64_t seed = 0);
PointCloud sample_surface(const CadModel& model, double density, std::uint64_t seed = 0);

/// Unsigned distance from p to the closest triangle.
double mesh_distance(std::span<const Triangle> mesh, const Vec3& p);

struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  bool contains(const Vec2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
};

struct SceneObject {
  ObjectClass cls = ObjectClass::Chair;
  YawPose pose;  // z = 0: objects rest on the ground
  std::uint64_t model_seed = 0;
  int id = 0;

  OrientedBox3 box() const;
};

struct Scene {
  Rect bounds;
  std::vector<Aabb> walls;
  std::vector<SceneObject> objects;
  YawPose robot_start;
  std::vector<Vec2> waypoints;
  /// Whether a robot inflated to 3x its radius can reach every waypoint.
  bool conservative_feasible = true;
  std::string density;

  const SceneObject* find(int id) const;
  /// Throws Error on overlapping footprints, duplicate ids or floating objects.
  void validate(double min_separation = 0.05) const;
};

enum class Layout { Scatter, Rows };

struct SceneConfig {
  int n_chairs = 0;
  int n_tables = 0;
  Rect bounds{0.0, 0.0, 12.0, 8.0};
  std::uint64_t seed = 0;
  Layout layout = Layout::Scatter;
  int n_waypoints = 2;
  double min_separation = 0.05;
  double robot_radius = 0.25;
  /// Extra clearance kept between the risk-free route and affordance shapes.
  double risk_margin = 0.15;
  AffordanceSet affordance;
  int max_retries = 400;
  std::string density;
};

/// Room with perimeter walls and randomly placed furniture. Every scene
/// returned has a route that stays clear of all affordance regions; whether
/// a 3x-inflated robot can also pass is recorded in conservative_feasible.
Scene randomize_scene(const SceneConfig& cfg);

/// Presets used by the benchmark: "sparse", "medium" and "dense".
SceneConfig density_preset(const std::string& density, std::uint64_t seed);

/// Distance between two box footprints; 0 when they touch or overlap.
double footprint_distance(const OrientedBox3& a, const OrientedBox3& b);
/// Distance in the ground plane from p to the nearest wall or furniture footprint.
double obstacle_clearance(const Scene& scene, const Vec2& p);
/// True if any ground-truth affordance region contains p.
bool in_risk_region(const Scene& scene, const AffordanceSet& aff, const Vec2& p);

/// Grid search (4-connected) over cells whose clearance is at least
/// `clearance`; when `avoid` is given, cells inside those shapes are blocked.
/// True if the start and all waypoints are mutually reachable.
bool route_exists(const Scene& scene, double clearance, const AffordanceSet* avoid,
                  double resolution = 0.1);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

nlohmann::json model_to_json(const CadModel& model);
CadModel model_from_json(const nlohmann::json& j);

}  // namespace oanav
