#pragma once

#include "oanav/costmap.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace oanav {

struct RobotSpec {
  double radius = 0.25;
  double v_max = 0.75;
  double w_max = 1.5;
  double a_v = 1.0;
  double a_w = 3.0;

  void validate() const;
};

/// Traversal costs are integers in micrometres so search results are exact.
inline constexpr double kCostUnit = 1e-6;

struct PlanResult {
  std::vector<Vec2> path;
  std::vector<Cell> cells;
  std::int64_t cost_units = 0;
  double cost = 0.0;
};

struct StepCosts {
  std::int64_t straight;
  std::int64_t diagonal;
};
StepCosts step_costs(double resolution);
/// Cost of entering a cell: step length plus cost_weight * cell cost.
std::int64_t cell_penalty(std::uint8_t cell_cost, double cost_weight);
inline bool traversable(std::uint8_t c) { return c < kInscribed; }

/// 8-connected A* with an octile heuristic. Throws when start or goal lies
/// outside the grid or on a blocked cell; none when unreachable.
std::optional<PlanResult> astar(const Grid2& map, const Vec2& start, const Vec2& goal, double cost_weight = 0.005);

/// Nearest traversable cell center to p (breadth-first over the grid).
std::optional<Vec2> nearest_free(const Grid2& map, const Vec2& p, double max_dist = 1.0);

struct RobotState {
  YawPose pose;
  double v = 0.0;
  double w = 0.0;
};

struct DwaConfig {
  double alpha = 1.0;   // heading
  double beta = 0.5;    // clearance
  double gamma = 0.3;   // velocity
  double delta = 0.2;   // mean cell cost, scaled to [0, 1]
  double zeta = 1.0;    // end-point distance from the global path
  double path_scale = 0.3;
  double path_deadband = 0.1;
  double horizon = 2.0;
  double sim_dt = 0.1;
  int n_v = 11;
  int n_w = 21;
  double lookahead = 0.8;
  double goal_tolerance = 0.25;
  /// Clearance beyond this many metres earns no extra score.
  double clearance_cap = 0.15;
  /// Heading error (rad) to the local goal above which only the slowest admissible speed is sampled.
  double turn_in_place = 0.6;
};

struct DwaCommand {
  double v = 0.0;
  double w = 0.0;
  bool goal_reached = false;
  bool recovery = false;
  double score = 0.0;
};

struct Rollout {
  std::vector<YawPose> poses;
  bool collides = false;
  double min_clearance = 0.0;
  double mean_cost = 0.0;
};

/// Constant-command forward simulation. Stops early once within the goal tolerance of `goal`.
Rollout rollout(const RobotState& s, double v, double w, const Grid2& map, const std::vector<double>& dist,
                const RobotSpec& spec, const DwaConfig& cfg, const Vec2& goal);

/// Local goal: the first path point at least `lookahead` beyond the path point closest to p.
Vec2 carrot(const std::vector<Vec2>& path, const Vec2& p, double lookahead);

struct DwaScore {
  double heading;
  double clearance;
  double velocity;
  double cost;
  double path;
  double total;
};
/// `path_distance` is the distance from the rollout end point to the global path.
DwaScore score_rollout(const Rollout& r, double v, const Vec2& local_goal, const RobotSpec& spec,
                       const DwaConfig& cfg, double path_distance = 0.0);

/// Samples the dynamic window and returns the best collision-free command.
/// `dist` is distance_transform(map) and may be empty (computed on demand).
DwaCommand dwa_step(const RobotState& s, const PlanResult& plan, const Grid2& map, const RobotSpec& spec, double dt,
                    const DwaConfig& cfg = {}, const std::vector<double>& dist = {});

/// Unicycle Euler step.
YawPose simulate_drive(const YawPose& pose, double v, double w, double dt);

}  // namespace oanav
