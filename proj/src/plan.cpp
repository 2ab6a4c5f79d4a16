#include "oanav/plan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

namespace oanav {

void RobotSpec::validate() const {
  if (!(radius > 0.0 && v_max > 0.0 && w_max > 0.0 && a_v > 0.0 && a_w > 0.0)) {
    throw Error("robot spec: all limits must be positive");
  }
}

StepCosts step_costs(double resolution) {
  return {std::llround(resolution / kCostUnit), std::llround(resolution * std::sqrt(2.0) / kCostUnit)};
}

std::int64_t cell_penalty(std::uint8_t cell_cost, double cost_weight) {
  return std::llround(cost_weight * static_cast<double>(cell_cost) / kCostUnit);
}

namespace {

Cell require_cell(const Grid2& map, const Vec2& p, const char* what) {
  const auto c = map.cell_of(p);
  if (!c) throw Error(std::string("astar: ") + what + " outside the grid");
  if (!traversable(map.at(c->x, c->y))) throw Error(std::string("astar: ") + what + " on a blocked cell");
  return *c;
}

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

}  // namespace

std::optional<PlanResult> astar(const Grid2& map, const Vec2& start, const Vec2& goal, double cost_weight) {
  if (cost_weight < 0.0) throw Error("astar: negative cost weight");
  const Cell s = require_cell(map, start, "start");
  const Cell g = require_cell(map, goal, "goal");
  const StepCosts sc = step_costs(map.resolution);
  auto heuristic = [&](int x, int y) {
    const std::int64_t dx = std::abs(x - g.x);
    const std::int64_t dy = std::abs(y - g.y);
    return sc.diagonal * std::min(dx, dy) + sc.straight * (std::max(dx, dy) - std::min(dx, dy));
  };

  const std::size_t n = map.cost.size();
  const std::int64_t inf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> dist(n, inf);
  std::vector<int> parent(n, -1);
  std::vector<char> closed(n, 0);
  using Entry = std::tuple<std::int64_t, std::int64_t, int>;  // f, h, index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const int si = static_cast<int>(map.index(s.x, s.y));
  const int gi = static_cast<int>(map.index(g.x, g.y));
  dist[si] = 0;
  open.emplace(heuristic(s.x, s.y), heuristic(s.x, s.y), si);
  while (!open.empty()) {
    const auto [f, h, i] = open.top();
    open.pop();
    if (closed[i]) continue;
    closed[i] = 1;
    if (i == gi) break;
    const int x = i % map.width;
    const int y = i / map.width;
    for (int k = 0; k < 8; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (!map.in_bounds(nx, ny)) continue;
      const std::uint8_t c = map.at(nx, ny);
      if (!traversable(c)) continue;
      const int ni = static_cast<int>(map.index(nx, ny));
      if (closed[ni]) continue;
      const std::int64_t nd = dist[i] + (k < 4 ? sc.straight : sc.diagonal) + cell_penalty(c, cost_weight);
      if (nd < dist[ni]) {
        dist[ni] = nd;
        parent[ni] = i;
        const std::int64_t nh = heuristic(nx, ny);
        open.emplace(nd + nh, nh, ni);
      }
    }
  }
  if (dist[gi] == inf) return std::nullopt;

  PlanResult res;
  for (int i = gi; i >= 0; i = parent[i]) res.cells.push_back({i % map.width, i / map.width});
  std::reverse(res.cells.begin(), res.cells.end());
  for (const auto& c : res.cells) res.path.push_back(map.center(c.x, c.y));
  res.cost_units = dist[gi];
  res.cost = static_cast<double>(dist[gi]) * kCostUnit;
  return res;
}

std::optional<Vec2> nearest_free(const Grid2& map, const Vec2& p, double max_dist) {
  const auto start = map.cell_of(p);
  if (!start) return std::nullopt;
  if (traversable(map.at(start->x, start->y))) return map.center(start->x, start->y);
  const int reach = static_cast<int>(std::ceil(max_dist / map.resolution));
  std::optional<Vec2> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int dy = -reach; dy <= reach; ++dy) {
    for (int dx = -reach; dx <= reach; ++dx) {
      const int x = start->x + dx;
      const int y = start->y + dy;
      if (!map.in_bounds(x, y) || !traversable(map.at(x, y))) continue;
      const double d = (map.center(x, y) - p).norm();
      if (d <= max_dist && d < best_d) {
        best_d = d;
        best = map.center(x, y);
      }
    }
  }
  return best;
}

YawPose simulate_drive(const YawPose& pose, double v, double w, double dt) {
  if (!(dt > 0.0)) throw Error("simulate_drive: dt must be positive");
  YawPose p = pose;
  p.x += v * std::cos(pose.yaw) * dt;
  p.y += v * std::sin(pose.yaw) * dt;
  p.yaw = wrap_angle(pose.yaw + w * dt);
  return p;
}

namespace {

double dist_at(const Grid2& map, const std::vector<double>& dist, const Vec2& p) {
  const auto c = map.cell_of(p);
  return c ? dist[map.index(c->x, c->y)] : 0.0;
}

}  // namespace

Rollout rollout(const RobotState& s, double v, double w, const Grid2& map, const std::vector<double>& dist,
                const RobotSpec& spec, const DwaConfig& cfg, const Vec2& goal) {
  Rollout r;
  const Vec2 p0(s.pose.x, s.pose.y);
  const bool start_blocked = !traversable(map.cost_at(p0));
  const double d0 = dist_at(map, dist, p0);
  const int steps = std::max(1, static_cast<int>(std::lround(cfg.horizon / cfg.sim_dt)));
  YawPose p = s.pose;
  double cost_sum = 0.0;
  r.min_clearance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < steps; ++i) {
    p = simulate_drive(p, v, w, cfg.sim_dt);
    r.poses.push_back(p);
    const Vec2 xy(p.x, p.y);
    const std::uint8_t c = map.cost_at(xy);
    const double d = dist_at(map, dist, xy);
    // Starting inside the inscribed band, only moves that gain clearance are allowed.
    if (start_blocked ? (c >= kLethal || d < d0 - 1e-9) : !traversable(c)) {
      r.collides = true;
      break;
    }
    cost_sum += c;
    r.min_clearance = std::min(r.min_clearance, d - spec.radius);
    if ((xy - goal).norm() <= cfg.goal_tolerance) break;
  }
  r.mean_cost = r.poses.empty() ? 0.0 : cost_sum / static_cast<double>(r.poses.size());
  return r;
}

Vec2 carrot(const std::vector<Vec2>& path, const Vec2& p, double lookahead) {
  if (path.empty()) throw Error("carrot: empty path");
  std::size_t closest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double d = (path[i] - p).squaredNorm();
    if (d < best) {
      best = d;
      closest = i;
    }
  }
  for (std::size_t j = closest; j < path.size(); ++j) {
    if ((path[j] - p).norm() >= lookahead) return path[j];
  }
  return path.back();
}

DwaScore score_rollout(const Rollout& r, double v, const Vec2& local_goal, const RobotSpec& spec,
                       const DwaConfig& cfg, double path_distance) {
  DwaScore s{};
  const YawPose& end = r.poses.back();
  const Vec2 to_goal = local_goal - Vec2(end.x, end.y);
  if (to_goal.norm() <= cfg.goal_tolerance) {
    s.heading = 1.0;
  } else {
    const double err = std::abs(angle_diff(std::atan2(to_goal.y(), to_goal.x()), end.yaw));
    s.heading = 1.0 - err / kPi;
  }
  s.clearance = std::clamp(r.min_clearance, 0.0, cfg.clearance_cap) / cfg.clearance_cap;
  s.velocity = v / spec.v_max;
  s.cost = r.mean_cost / (kInscribed - 1);
  s.path = std::clamp((path_distance - cfg.path_deadband) / cfg.path_scale, 0.0, 1.0);
  s.total = cfg.alpha * s.heading + cfg.beta * s.clearance + cfg.gamma * s.velocity - cfg.delta * s.cost -
            cfg.zeta * s.path;
  return s;
}

DwaCommand dwa_step(const RobotState& s, const PlanResult& plan, const Grid2& map, const RobotSpec& spec, double dt,
                    const DwaConfig& cfg, const std::vector<double>& dist_in) {
  if (plan.path.empty()) throw Error("dwa_step: empty plan");
  if (!(dt > 0.0)) throw Error("dwa_step: dt must be positive");
  const Vec2 pos(s.pose.x, s.pose.y);
  const Vec2 goal = plan.path.back();
  DwaCommand cmd;
  if ((pos - goal).norm() <= cfg.goal_tolerance) {
    cmd.goal_reached = true;
    return cmd;
  }
  std::vector<double> computed;
  const std::vector<double>& dist = dist_in.empty() ? (computed = distance_transform(map)) : dist_in;
  const Vec2 local = carrot(plan.path, pos, cfg.lookahead);
  const Vec2 to_local = local - pos;
  const double heading_err = angle_diff(std::atan2(to_local.y(), to_local.x()), s.pose.yaw);

  const double v_lo = std::max(0.0, s.v - spec.a_v * dt);
  // Arrive at the goal tolerance with zero speed.
  const double v_stop = std::sqrt(2.0 * spec.a_v * std::max(0.0, (pos - goal).norm() - cfg.goal_tolerance));
  const double v_hi = std::abs(heading_err) > cfg.turn_in_place
                          ? v_lo
                          : std::max(v_lo, std::min({spec.v_max, s.v + spec.a_v * dt, v_stop}));
  const double w_lo = std::max(-spec.w_max, s.w - spec.a_w * dt);
  const double w_hi = std::min(spec.w_max, s.w + spec.a_w * dt);
  bool found = false;
  double best = -std::numeric_limits<double>::infinity();
  const int n_v = v_hi > v_lo ? cfg.n_v : 1;
  for (int i = 0; i < n_v; ++i) {
    const double v = n_v > 1 ? v_lo + (v_hi - v_lo) * i / (n_v - 1) : v_lo;
    for (int j = 0; j < cfg.n_w; ++j) {
      const double w = cfg.n_w > 1 ? w_lo + (w_hi - w_lo) * j / (cfg.n_w - 1) : w_lo;
      const Rollout r = rollout(s, v, w, map, dist, spec, cfg, goal);
      if (r.collides) continue;
      const Vec2 end(r.poses.back().x, r.poses.back().y);
      double pd = std::numeric_limits<double>::infinity();
      for (const auto& q : plan.path) pd = std::min(pd, (q - end).squaredNorm());
      const double total = score_rollout(r, v, local, spec, cfg, std::sqrt(pd)).total;
      if (total > best) {
        best = total;
        cmd.v = v;
        cmd.w = w;
        cmd.score = total;
        found = true;
      }
    }
  }
  if (!found) {
    cmd.v = 0.0;
    cmd.w = std::clamp(heading_err >= 0.0 ? spec.w_max : -spec.w_max, w_lo, w_hi);
    cmd.recovery = true;
  }
  return cmd;
}

}  // namespace oanav
