#include "oanav/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace oanav {

VariantSpec variant_spec(Variant v) {
  switch (v) {
    case Variant::Con:
      return {v, "Con", 3.0, false, Perception::None};
    case Variant::Oppo:
      return {v, "Oppo", 1.0, false, Perception::None};
    case Variant::GtPerc:
      return {v, "GT-Perc", 1.0, true, Perception::OracleExact};
    case Variant::Ours:
      return {v, "Ours", 1.0, true, Perception::FullPipeline};
  }
  throw Error("unknown variant");
}

std::string to_string(Variant v) { return variant_spec(v).name; }

Variant variant_from_string(const std::string& s) {
  for (const Variant v : all_variants()) {
    std::string lower = to_string(v);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    std::string in = s;
    std::transform(in.begin(), in.end(), in.begin(), [](unsigned char c) { return std::tolower(c); });
    if (in == lower || (v == Variant::GtPerc && (in == "gtperc" || in == "gt_perc"))) return v;
  }
  throw Error("unknown planner variant: " + s);
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Con, Variant::Oppo, Variant::GtPerc, Variant::Ours};
  return v;
}

BenchConfig::BenchConfig() { lidar.horizontal_step = 1.0 * kDeg; }

// ---------------------------------------------------------------------------
// Config JSON

NLOHMANN_JSON_SERIALIZE_ENUM(ObjectClass, {{ObjectClass::Chair, "chair"}, {ObjectClass::Table, "table"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RobotSpec, radius, v_max, w_max, a_v, a_w)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DwaConfig, alpha, beta, gamma, delta, horizon, sim_dt, n_v, n_w, lookahead,
                                   goal_tolerance, clearance_cap)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LidarConfig, n_beams, fov_lower, fov_upper, horizontal_step, max_range,
                                   range_noise_sigma, rate, mount_height)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(OracleNoise, sigma_center, sigma_size, sigma_yaw, p_flip, p_miss, p_fp,
                                   min_points, max_range, class_eps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(IcpConfig, levels, corr_max_dist, step_tol, max_iters, cauchy_scale, e_min, e_max,
                                   min_inlier_ratio, max_points, crop_scale, use_orientation_candidates)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrackerConfig, giou_min, max_misses, p_exist_min, occlusion_rays,
                                   occlusion_fraction, duplicate_giou, valid_range, q_pos, q_yaw, q_scale, q_vel,
                                   r_pos, r_yaw, r_scale, p0_pos, p0_yaw, p0_scale, p0_vel)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GroundConfig, iterations, inlier_dist, min_inlier_ratio, max_tilt_deg, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AffordanceSpec, cls, semi_major, semi_minor, half_len, half_wid, side_pad,
                                   peak_cost)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AffordanceSet, chair, table)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BenchConfig, dt, detect_every, window, replan_period, timeout_per_waypoint,
                                   grid_resolution, inflation_extent, inflation_decay, cost_weight, plan_margin,
                                   ceiling_height, stall_time, always_run_perception, robot, dwa, lidar, noise, icp,
                                   tracker, ground, affordance)

nlohmann::json config_to_json(const BenchConfig& cfg) { return cfg; }

namespace {

void check_keys(const nlohmann::json& patch, const nlohmann::json& ref, const std::string& prefix) {
  if (!patch.is_object()) return;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!ref.contains(it.key())) throw Error("unknown config key: " + prefix + it.key());
    if (it.value().is_object() && ref.at(it.key()).is_object()) {
      check_keys(it.value(), ref.at(it.key()), prefix + it.key() + ".");
    }
  }
}

void validate(const BenchConfig& c) {
  if (!(c.dt > 0.0)) throw Error("config: dt must be positive");
  if (c.detect_every < 1 || c.window < 1) throw Error("config: detect_every and window must be >= 1");
  if (!(c.grid_resolution > 0.0)) throw Error("config: grid_resolution must be positive");
  if (c.cost_weight < 0.0) throw Error("config: cost_weight must be non-negative");
  if (c.affordance.chair.semi_major < c.affordance.chair.semi_minor) {
    throw Error("config: chair semi_major must be >= semi_minor");
  }
  if (c.affordance.chair.peak_cost >= kInscribed || c.affordance.table.peak_cost >= kInscribed) {
    throw Error("config: affordance peak cost must stay below the inscribed cost");
  }
  c.robot.validate();
  c.lidar.validate();
  c.icp.validate();
}

}  // namespace

BenchConfig config_from_json(const nlohmann::json& patch, const BenchConfig& base) {
  nlohmann::json j = config_to_json(base);
  check_keys(patch, j, "");
  j.merge_patch(patch);
  BenchConfig out;
  try {
    out = j.get<BenchConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  out.affordance.chair.cls = ObjectClass::Chair;
  out.affordance.table.cls = ObjectClass::Table;
  validate(out);
  return out;
}

BenchConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Episode

namespace {

const CadDatabase& default_models() {
  static const CadDatabase db;
  return db;
}

/// Full perception stack: scan, accumulate, ground removal, detection,
/// verification and tracking.
class Perceiver {
 public:
  Perceiver(const Scene& scene, const BenchConfig& cfg, std::uint64_t seed)
      : scene_(scene), cfg_(cfg), caster_(scene), acc_(static_cast<std::size_t>(cfg.window)), tracker_(cfg.tracker),
        rng_(seed ^ 0xA5A5F00DULL) {}

  /// Returns true when the tracker ran on this tick.
  bool tick(const YawPose& robot, int frame, std::ostringstream* det_log, std::ostringstream* track_log) {
    const Pose3 sensor = sensor_pose_for(robot, cfg_.lidar);
    PointCloud cloud = scan(caster_, sensor, cfg_.lidar, rng_);
    if (!ground_) {
      try {
        ground_ = detect_ground(cloud, cfg_.ground).plane;
      } catch (const Error&) {
        return false;
      }
    }
    acc_.push({sensor, std::move(cloud), frame});
    if (frame % cfg_.detect_every != 0) return false;

    const PointCloud filtered = filter_cloud(acc_.cloud(), *ground_, cfg_.ceiling_height, cfg_.ground.inlier_dist);
    const auto dets = detect_oracle(scene_, sensor, filtered, cfg_.noise, rng_);
    std::vector<VerifiedDetection> verified;
    for (const auto& d : dets) {
      if (auto v = verify(d, filtered, default_models(), cfg_.icp)) verified.push_back(*v);
    }
    tracker_.step(verified, sensor, frame, cfg_.detect_every * cfg_.dt);
    if (det_log) write_detections(*det_log, frame, dets);
    if (track_log) write_tracks(*track_log, frame, tracker_.snapshot());
    return true;
  }

  const Tracker& tracker() const { return tracker_; }

 private:
  const Scene& scene_;
  const BenchConfig& cfg_;
  RayCaster caster_;
  Accumulator acc_;
  Tracker tracker_;
  std::optional<Plane> ground_;
  std::mt19937_64 rng_;
};

struct Signature {
  int id;
  int label;
  long x, y, yaw;
  bool operator==(const Signature&) const = default;
};

std::vector<Signature> signature(const std::vector<ObjectTrack>& tracks) {
  std::vector<Signature> s;
  for (const auto& t : tracks) {
    const YawPose p = t.pose();
    s.push_back({t.id, static_cast<int>(t.label), std::lround(p.x / 0.05), std::lround(p.y / 0.05),
                 std::lround(p.yaw / 0.05)});
  }
  return s;
}

std::optional<PlanResult> plan_on(const Grid2& map, const Vec2& from, const Vec2& to, double cost_weight) {
  const auto s = nearest_free(map, from, 1.0);
  const auto g = nearest_free(map, to, 1.0);
  if (!s || !g) return std::nullopt;
  auto p = astar(map, *s, *g, cost_weight);
  if (p) {
    // Finish at the true goal so the local planner closes the last gap.
    p->path.push_back(to);
  }
  return p;
}

}  // namespace

EpisodeMetrics run_episode(const Scene& scene, Variant variant, const BenchConfig& cfg, std::uint64_t seed,
                           EpisodeLogs* logs, const std::string& scene_name) {
  validate(cfg);
  const VariantSpec vs = variant_spec(variant);
  EpisodeMetrics m;
  m.scene = scene_name;
  m.variant = vs.name;
  m.seed = seed;

  const double r_ins = vs.inflation_mult * cfg.robot.radius;
  const Grid2 background = background_map(scene, cfg.grid_resolution, true);
  const Grid2 base = inflate(background, r_ins, r_ins + cfg.inflation_extent, cfg.inflation_decay);
  const AffordanceSet plan_aff = cfg.affordance.padded(cfg.plan_margin);

  Grid2 map = base;
  if (vs.perception == Perception::OracleExact) {
    for (const auto& o : scene.objects) {
      merge_into(map, object_layer(o.pose, nominal_size(o.cls, o.model_seed), plan_aff.get(o.cls), base));
    }
  }
  std::vector<double> dist = distance_transform(map);

  const bool perceive = vs.perception == Perception::FullPipeline || cfg.always_run_perception;
  std::optional<Perceiver> perceiver;
  if (perceive) perceiver.emplace(scene, cfg, seed);
  std::ostringstream det_log, track_log;
  if (logs) {
    write_detection_header(det_log);
    write_track_header(track_log);
  }
  std::vector<Signature> last_sig;

  RobotState state;
  state.pose = scene.robot_start;
  state.pose.z = 0.0;
  int frame = 0;
  double t = 0.0;
  bool failed = false;

  for (const Vec2& goal : scene.waypoints) {
    WaypointMetrics wm;
    std::optional<PlanResult> plan;
    double last_plan = -1e9;
    bool dirty = true;
    double best_dist = (Vec2(state.pose.x, state.pose.y) - goal).norm();
    double last_progress = 0.0;

    while (true) {
      const Vec2 pos(state.pose.x, state.pose.y);
      if ((pos - goal).norm() <= cfg.dwa.goal_tolerance) {
        wm.reached = true;
        break;
      }
      if (wm.t >= cfg.timeout_per_waypoint - 1e-9) {
        m.failure = "timeout";
        break;
      }

      if (perceiver) {
        const bool ran = perceiver->tick(state.pose, frame, logs ? &det_log : nullptr, logs ? &track_log : nullptr);
        if (ran && vs.perception == Perception::FullPipeline) {
          const auto tracks = perceiver->tracker().snapshot();
          auto sig = signature(tracks);
          if (sig != last_sig) {
            last_sig = std::move(sig);
            map = base;
            for (const auto& tr : tracks) {
              merge_into(map, object_layer(tr.pose(), tr.box().size, plan_aff.get(tr.label), base));
            }
            dist = distance_transform(map);
            dirty = true;
          }
        }
      }
      ++frame;

      if (dirty || wm.t - last_plan >= cfg.replan_period - 1e-9 || !plan) {
        auto p = plan_on(map, pos, goal, cfg.cost_weight);
        if (!p && vs.perception != Perception::FullPipeline) {
          m.failure = "no path";
          break;
        }
        if (!p) p = plan_on(base, pos, goal, cfg.cost_weight);
        if (p) {
          plan = std::move(p);
          ++m.replans;
        } else if (!plan) {
          m.failure = "no path";
          break;
        }
        last_plan = wm.t;
        dirty = false;
      }

      const DwaCommand cmd = dwa_step(state, *plan, map, cfg.robot, cfg.dt, cfg.dwa, dist);
      state.v = cmd.v;
      state.w = cmd.w;
      state.pose = simulate_drive(state.pose, cmd.v, cmd.w, cfg.dt);
      wm.t += cfg.dt;
      wm.d += std::abs(cmd.v) * cfg.dt;
      t += cfg.dt;
      const Vec2 np(state.pose.x, state.pose.y);
      const bool risk = in_risk_region(scene, cfg.affordance, np);
      if (risk) wm.t_r += cfg.dt;
      if (obstacle_clearance(scene, np) < cfg.robot.radius - 1e-9) ++m.min_clearance_violations;
      if (logs) logs->trajectory.push_back({t, np.x(), np.y(), state.pose.yaw, cmd.v, cmd.w, risk});

      const double d_goal = (np - goal).norm();
      if (d_goal < best_dist - 0.1) {
        best_dist = d_goal;
        last_progress = wm.t;
      } else if (wm.t - last_progress > cfg.stall_time) {
        last_progress = wm.t;
        best_dist = d_goal;
        dirty = true;
      }
    }

    m.waypoints.push_back(wm);
    m.t_g += wm.t;
    m.t_r += wm.t_r;
    m.d_g += wm.d;
    if (!wm.reached) {
      failed = true;
      break;
    }
  }
  m.success = !failed && m.waypoints.size() == scene.waypoints.size();
  if (logs) {
    logs->detections_csv = det_log.str();
    logs->tracks_csv = track_log.str();
    logs->background = background;
    logs->final_map = map;
  }
  return m;
}

void write_metrics_header(std::ostream& out) {
  out << "scene,variant,seed,success,t_g,t_r,d_g,waypoints_reached,replans,clearance_violations,failure\n";
}

void write_metrics_row(std::ostream& out, const EpisodeMetrics& m) {
  int reached = 0;
  for (const auto& w : m.waypoints) reached += w.reached;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%llu,%d,%.3f,%.3f,%.3f,%d,%d,%d,%s\n", m.scene.c_str(), m.variant.c_str(),
                static_cast<unsigned long long>(m.seed), m.success ? 1 : 0, m.t_g, m.t_r, m.d_g, reached, m.replans,
                m.min_clearance_violations, m.failure.c_str());
  out << buf;
}

void write_episode_logs(const EpisodeLogs& logs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "trajectory.csv");
    out << "t,x,y,yaw,v,w,in_risk\n";
    char buf[160];
    for (const auto& r : logs.trajectory) {
      std::snprintf(buf, sizeof buf, "%.2f,%.4f,%.4f,%.4f,%.3f,%.3f,%d\n", r.t, r.x, r.y, r.yaw, r.v, r.w,
                    r.in_risk ? 1 : 0);
      out << buf;
    }
  }
  if (!logs.detections_csv.empty()) std::ofstream(dir / "detections.csv") << logs.detections_csv;
  if (!logs.tracks_csv.empty()) std::ofstream(dir / "tracks.csv") << logs.tracks_csv;
  if (!logs.background.cost.empty()) write_pgm(logs.background, dir / "background.pgm");
  if (!logs.final_map.cost.empty()) write_pgm(logs.final_map, dir / "costmap.pgm");
}

std::vector<VariantSummary> summarize(const std::vector<EpisodeMetrics>& metrics) {
  std::vector<VariantSummary> out;
  for (const auto& m : metrics) {
    auto it = std::find_if(out.begin(), out.end(), [&](const VariantSummary& s) { return s.variant == m.variant; });
    if (it == out.end()) {
      out.push_back({m.variant});
      it = out.end() - 1;
    }
    ++it->runs;
    if (!m.success) continue;
    ++it->successes;
    it->t_g_sum += m.t_g;
    it->t_r_sum += m.t_r;
    it->d_g_sum += m.d_g;
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<VariantSummary>& s) {
  out << "variant,runs,success,t_g_sum,t_g_mean,t_r_sum,t_r_mean,d_g_sum,d_g_mean\n";
  char buf[320];
  for (const auto& v : s) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n", v.variant.c_str(), v.runs, v.successes,
                  v.t_g_sum, v.t_g_mean(), v.t_r_sum, v.t_r_mean(), v.d_g_sum, v.d_g_mean());
    out << buf;
  }
}

void write_summary_svg(std::ostream& out, const std::vector<VariantSummary>& s) {
  const double w = 640, h = 360, left = 60, bottom = 300, top = 40;
  double vmax = 1.0;
  for (const auto& v : s) vmax = std::max({vmax, v.t_g_mean(), v.t_r_mean()});
  const double scale = (bottom - top) / vmax;
  const double group = s.empty() ? 0.0 : (w - left - 20) / static_cast<double>(s.size());
  out << std::fixed << std::setprecision(1);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
      << "Mean goal time t_g and risk time t_r over successful runs (s)</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << w - 10 << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double val = vmax * k / 4.0;
    const double y = bottom - val * scale;
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" font-family=\"sans-serif\" font-size=\"10\" "
        << "text-anchor=\"end\">" << val << "</text>\n";
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double x0 = left + group * static_cast<double>(i) + 0.15 * group;
    const double bw = 0.33 * group;
    const double hg = s[i].t_g_mean() * scale;
    const double hr = s[i].t_r_mean() * scale;
    out << "<rect x=\"" << x0 << "\" y=\"" << bottom - hg << "\" width=\"" << bw << "\" height=\"" << hg
        << "\" fill=\"#4c72b0\"/>\n";
    out << "<rect x=\"" << x0 + bw << "\" y=\"" << bottom - hr << "\" width=\"" << bw << "\" height=\"" << hr
        << "\" fill=\"#dd8452\"/>\n";
    out << "<text x=\"" << x0 + bw << "\" y=\"" << bottom + 16 << "\" font-family=\"sans-serif\" font-size=\"12\" "
        << "text-anchor=\"middle\">" << s[i].variant << " (" << s[i].successes << "/" << s[i].runs << ")</text>\n";
  }
  out << "<rect x=\"" << w - 150 << "\" y=\"36\" width=\"10\" height=\"10\" fill=\"#4c72b0\"/>"
      << "<text x=\"" << w - 135 << "\" y=\"45\" font-family=\"sans-serif\" font-size=\"11\">t_g</text>\n";
  out << "<rect x=\"" << w - 100 << "\" y=\"36\" width=\"10\" height=\"10\" fill=\"#dd8452\"/>"
      << "<text x=\"" << w - 85 << "\" y=\"45\" font-family=\"sans-serif\" font-size=\"11\">t_r</text>\n";
  out << "</svg>\n";
}

std::vector<EpisodeMetrics> run_batch(const std::vector<NamedScene>& scenes, const std::vector<Variant>& variants,
                                      const BenchConfig& cfg, const BatchOptions& opt,
                                      const std::filesystem::path& out_dir) {
  if (scenes.empty()) throw Error("run_batch: no scenes");
  if (variants.empty()) throw Error("run_batch: no variants");
  struct Job {
    std::size_t scene;
    Variant variant;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (const Variant v : variants) jobs.push_back({i, v});
  }
  std::vector<EpisodeMetrics> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      const std::uint64_t seed = opt.seed * 1000003ULL + job.scene;
      try {
        EpisodeLogs logs;
        results[k] = run_episode(scenes[job.scene].scene, job.variant, cfg, seed, opt.write_logs ? &logs : nullptr,
                                 scenes[job.scene].name);
        if (opt.write_logs && !out_dir.empty()) {
          write_episode_logs(logs, out_dir / "episodes" / (scenes[job.scene].name + "_" + to_string(job.variant)));
        }
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  unsigned n = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!errors[k].empty()) {
      throw Error("episode " + scenes[jobs[k].scene].name + "/" + to_string(jobs[k].variant) + ": " + errors[k]);
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream mcsv(out_dir / "metrics.csv");
    write_metrics_header(mcsv);
    for (const auto& r : results) write_metrics_row(mcsv, r);
    const auto summary = summarize(results);
    std::ofstream scsv(out_dir / "summary.csv");
    write_summary_csv(scsv, summary);
    std::ofstream svg(out_dir / "summary.svg");
    write_summary_svg(svg, summary);
    std::ofstream(out_dir / "config.json") << config_to_json(cfg).dump(2) << '\n';
  }
  return results;
}

std::vector<NamedScene> generate_scene_set(int n_sparse, int n_medium, int n_dense, std::uint64_t master_seed) {
  std::vector<NamedScene> out;
  auto add = [&](const std::string& density, int n, std::uint64_t salt) {
    for (int i = 0; i < n; ++i) {
      const std::uint64_t seed = master_seed * 1000003ULL + salt * 1000ULL + static_cast<std::uint64_t>(i);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03d", density.c_str(), i);
      out.push_back({name, randomize_scene(density_preset(density, seed))});
    }
  };
  add("sparse", n_sparse, 1);
  add("medium", n_medium, 2);
  add("dense", n_dense, 3);
  return out;
}

}  // namespace oanav
