#pragma once

#include "oanav/costmap.hpp"
#include "oanav/detect.hpp"
#include "oanav/icp.hpp"
#include "oanav/lidar.hpp"
#include "oanav/plan.hpp"
#include "oanav/scene.hpp"
#include "oanav/track.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace oanav {

enum class Variant { Con, Oppo, GtPerc, Ours };
enum class Perception { None, OracleExact, FullPipeline };

struct VariantSpec {
  Variant variant;
  std::string name;
  double inflation_mult;
  bool use_object_layers;
  Perception perception;
};

VariantSpec variant_spec(Variant v);
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
const std::vector<Variant>& all_variants();

struct BenchConfig {
  double dt = 0.1;
  int detect_every = 5;
  int window = 5;
  double replan_period = 1.0;
  double timeout_per_waypoint = 180.0;
  double grid_resolution = 0.05;
  /// Decay band beyond the inscribed radius.
  double inflation_extent = 0.5;
  double inflation_decay = 10.0;
  double cost_weight = 0.01;
  /// Padding applied to affordance shapes for planning (not for risk accounting).
  double plan_margin = 0.25;
  double ceiling_height = 2.2;
  /// Seconds without 0.1 m of progress before the planner is reset.
  double stall_time = 6.0;
  /// Run the perception stack even for variants that ignore it.
  bool always_run_perception = false;

  RobotSpec robot;
  DwaConfig dwa;
  LidarConfig lidar;
  OracleNoise noise;
  IcpConfig icp;
  TrackerConfig tracker;
  GroundConfig ground;
  AffordanceSet affordance;

  BenchConfig();
};

nlohmann::json config_to_json(const BenchConfig& cfg);
/// Applies `patch` (JSON merge patch) over `base`. Unknown keys are errors.
BenchConfig config_from_json(const nlohmann::json& patch, const BenchConfig& base = {});
BenchConfig load_config(const std::filesystem::path& path);

struct WaypointMetrics {
  double t = 0.0;
  double t_r = 0.0;
  double d = 0.0;
  bool reached = false;
};

struct EpisodeMetrics {
  std::string scene;
  std::string variant;
  std::uint64_t seed = 0;
  double t_g = 0.0;
  double t_r = 0.0;
  double d_g = 0.0;
  bool success = false;
  std::string failure;
  int replans = 0;
  int min_clearance_violations = 0;
  std::vector<WaypointMetrics> waypoints;
};

struct TrajectoryRow {
  double t, x, y, yaw, v, w;
  bool in_risk;
};

struct EpisodeLogs {
  std::vector<TrajectoryRow> trajectory;
  std::string detections_csv;
  std::string tracks_csv;
  Grid2 background;
  Grid2 final_map;
};

/// Closed-loop run over all scene waypoints. Deterministic in (scene, variant, cfg, seed).
EpisodeMetrics run_episode(const Scene& scene, Variant variant, const BenchConfig& cfg, std::uint64_t seed,
                           EpisodeLogs* logs = nullptr, const std::string& scene_name = "scene");

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpisodeMetrics& m);
void write_episode_logs(const EpisodeLogs& logs, const std::filesystem::path& dir);

struct VariantSummary {
  std::string variant;
  int runs = 0;
  int successes = 0;
  double t_g_sum = 0.0;
  double t_r_sum = 0.0;
  double d_g_sum = 0.0;
  double t_g_mean() const { return successes ? t_g_sum / successes : 0.0; }
  double t_r_mean() const { return successes ? t_r_sum / successes : 0.0; }
  double d_g_mean() const { return successes ? d_g_sum / successes : 0.0; }
};

/// Sums and means over successful runs, one row per variant in first-seen order.
std::vector<VariantSummary> summarize(const std::vector<EpisodeMetrics>& metrics);
void write_summary_csv(std::ostream& out, const std::vector<VariantSummary>& s);
void write_summary_svg(std::ostream& out, const std::vector<VariantSummary>& s);

struct NamedScene {
  std::string name;
  Scene scene;
};

struct BatchOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  bool write_logs = false;
  std::uint64_t seed = 1;
};

/// Runs every (scene, variant) pair. Episode seeds derive from the batch
/// seed and scene index, so results do not depend on thread scheduling.
std::vector<EpisodeMetrics> run_batch(const std::vector<NamedScene>& scenes, const std::vector<Variant>& variants,
                                      const BenchConfig& cfg, const BatchOptions& opt,
                                      const std::filesystem::path& out_dir = {});

/// Mixed-density scene set: counts per preset, seeds derived from `master_seed`.
std::vector<NamedScene> generate_scene_set(int n_sparse, int n_medium, int n_dense, std::uint64_t master_seed);

}  // namespace oanav
