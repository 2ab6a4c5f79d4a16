#include "oanav/annotate.hpp"

#include "oanav/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

namespace oanav {

std::string to_string(Category c) {
  switch (c) {
    case Category::Ground:
      return "ground";
    case Category::Permanent:
      return "permanent";
    case Category::Movable:
      return "movable";
    case Category::Dynamic:
      return "dynamic";
  }
  return "unknown";
}

void AnnotateConfig::validate() const {
  if (!(voxel > 0.0)) throw Error("annotate: voxel size must be positive");
  if (voxel_tolerance < 0) throw Error("annotate: negative voxel tolerance");
  if (!(cluster_eps > 0.0)) throw Error("annotate: cluster eps must be positive");
  if (!(dist_thresh > 0.0)) throw Error("annotate: distance threshold must be positive");
  icp.validate();
}

namespace {

using VoxelKey = std::int64_t;

// 21 bits per axis, offset so small negative coordinates stay valid.
VoxelKey voxel_key(long x, long y, long z) {
  constexpr long kOff = 1L << 20;
  return ((x + kOff) << 42) | ((y + kOff) << 21) | (z + kOff);
}

std::array<long, 3> voxel_of(const Vec3& p, double size) {
  return {std::lround(std::floor(p.x() / size)), std::lround(std::floor(p.y() / size)),
          std::lround(std::floor(p.z() / size))};
}

}  // namespace

std::vector<std::vector<Category>> classify_movable(std::span<const PointCloud> sessions, const AnnotateConfig& cfg) {
  if (sessions.size() < 2) throw Error("classify_movable: need at least two sessions");
  cfg.validate();
  PointCloud all;
  for (const auto& s : sessions) all.points.insert(all.points.end(), s.points.begin(), s.points.end());
  const Plane ground = detect_ground(all, cfg.ground).plane;

  std::vector<std::vector<Category>> out(sessions.size());
  std::vector<std::unordered_set<VoxelKey>> occupied(sessions.size());
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const auto& pts = sessions[s].points;
    out[s].assign(pts.size(), Category::Movable);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::abs(ground.distance(pts[i])) <= cfg.ground.inlier_dist) {
        out[s][i] = Category::Ground;
        continue;
      }
      const auto v = voxel_of(pts[i], cfg.voxel);
      occupied[s].insert(voxel_key(v[0], v[1], v[2]));
    }
  }

  const int r = cfg.voxel_tolerance;
  auto seen_near = [&](std::size_t t, const std::array<long, 3>& v) {
    for (int dz = -r; dz <= r; ++dz) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (occupied[t].count(voxel_key(v[0] + dx, v[1] + dy, v[2] + dz))) return true;
        }
      }
    }
    return false;
  };
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const auto& pts = sessions[s].points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (out[s][i] == Category::Ground) continue;
      const auto v = voxel_of(pts[i], cfg.voxel);
      bool everywhere = true;
      for (std::size_t t = 0; t < sessions.size() && everywhere; ++t) {
        if (t != s) everywhere = seen_near(t, v);
      }
      if (everywhere) out[s][i] = Category::Permanent;
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> cluster_movable(std::span<const Vec3> points, const AnnotateConfig& cfg) {
  if (points.empty()) return {};
  auto clusters = clusters_from_labels(dbscan(points, cfg.cluster_eps, cfg.cluster_min_pts));
  std::erase_if(clusters, [&](const auto& c) { return c.size() < cfg.min_cluster; });
  return clusters;
}

std::optional<Alignment> align_cad(const PointCloud& cluster, const ModelIndex& model, const OrientedBox3& init,
                                   const IcpConfig& cfg) {
  if (cluster.size() < 10) return std::nullopt;
  const YawPose pose0{init.center.x(), init.center.y(), init.center.z() - 0.5 * init.size.z(), init.yaw};
  const auto best = icp_candidates(model, cluster, pose0, cfg);
  if (!best || best->residual > cfg.e_max || best->inlier_ratio < cfg.min_inlier_ratio) return std::nullopt;
  const IcpResult& fit = *best;
  Alignment a;
  a.cls = model.model.cls;
  a.pose = fit.pose;
  // Only the rotation about z is kept.
  a.pose.z = 0.0;
  const Vec3 size = model.model.nominal_size;
  a.box = {Vec3(a.pose.x, a.pose.y, 0.5 * size.z()), size, a.pose.yaw};
  a.residual = fit.residual;
  a.inlier_ratio = fit.inlier_ratio;
  return a;
}

std::vector<bool> label_points(std::span<const Vec3> points, const CadModel& model, const YawPose& pose,
                               double dist_thresh) {
  const Pose3 inv = pose.to_pose3().inverse();
  const Aabb b = model.bounds();
  std::vector<bool> out(points.size(), false);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 local = inv.apply(points[i]);
    // Cheap reject before the exact surface distance.
    const Vec3 outside = (b.min - local).cwiseMax(local - b.max).cwiseMax(Vec3::Zero());
    if (outside.norm() > dist_thresh) continue;
    out[i] = mesh_distance(model.mesh, local) <= dist_thresh;
  }
  return out;
}

std::vector<ManualBox> load_manual_boxes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read manual boxes " + path.string());
  std::vector<ManualBox> out;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j.at("boxes")) {
      ManualBox m;
      m.session = e.value("session", 0);
      const auto& c = e.at("center");
      const auto& s = e.at("size");
      m.box.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      m.box.size = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
      m.box.yaw = e.value("yaw", 0.0);
      if (e.contains("class")) m.cls = class_from_string(e.at("class").get<std::string>());
      out.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("manual boxes " + path.string() + ": " + e.what());
  }
  return out;
}

namespace {

// Tries the requested class, or every class, and keeps the best accepted fit.
std::optional<Alignment> best_alignment(const PointCloud& cluster, const CadDatabase& models, const OrientedBox3& init,
                                        std::optional<ObjectClass> cls, const IcpConfig& cfg) {
  std::optional<Alignment> best;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto oc = static_cast<ObjectClass>(c);
    if (cls && *cls != oc) continue;
    auto a = align_cad(cluster, models.get(oc), init, cfg);
    if (a && (!best || a->residual < best->residual)) best = a;
  }
  return best;
}

}  // namespace

Annotation annotate(std::span<const PointCloud> sessions, const CadDatabase& models, const AnnotateConfig& cfg,
                    std::span<const ManualBox> manual) {
  const auto categories = classify_movable(sessions, cfg);
  Annotation ann;
  int next_id = 0;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const auto& pts = sessions[s].points;
    SessionLabels labels;
    labels.category = categories[s];
    labels.semantic.assign(pts.size(), kNoSemantic);
    labels.instance.assign(pts.size(), kNoInstance);

    std::vector<std::size_t> movable;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (labels.category[i] == Category::Movable) movable.push_back(i);
    }

    // Manual boxes claim their points first; the rest go to clustering.
    struct Group {
      std::vector<std::size_t> idx;
      std::optional<OrientedBox3> box;
      std::optional<ObjectClass> cls;
      bool manual = false;
    };
    std::vector<Group> groups;
    std::vector<char> claimed(pts.size(), 0);
    for (const auto& m : manual) {
      if (m.session != static_cast<int>(s)) continue;
      Group g{{}, m.box, m.cls, true};
      for (const auto i : movable) {
        if (!claimed[i] && m.box.contains(pts[i])) {
          g.idx.push_back(i);
          claimed[i] = 1;
        }
      }
      groups.push_back(std::move(g));
    }
    std::vector<Vec3> free_pts;
    std::vector<std::size_t> free_idx;
    for (const auto i : movable) {
      if (claimed[i]) continue;
      free_pts.push_back(pts[i]);
      free_idx.push_back(i);
    }
    for (const auto& c : cluster_movable(free_pts, cfg)) {
      Group g;
      for (const auto k : c) g.idx.push_back(free_idx[k]);
      groups.push_back(std::move(g));
    }

    for (const auto& g : groups) {
      if (g.idx.size() < 3) continue;
      PointCloud cluster;
      for (const auto i : g.idx) cluster.push_back(pts[i], kNoInstance);
      Instance inst;
      inst.id = next_id++;
      inst.session = static_cast<int>(s);
      inst.manual = g.manual;
      const OrientedBox3 init = g.box ? *g.box : pca_box(cluster.points);
      inst.box = init;
      inst.pose = {init.center.x(), init.center.y(), 0.0, init.yaw};
      if (const auto a = best_alignment(cluster, models, init, g.cls, cfg.icp)) {
        inst.aligned = true;
        inst.cls = a->cls;
        inst.pose = a->pose;
        inst.box = a->box;
        inst.residual = a->residual;
        const auto keep = label_points(cluster.points, models.get(a->cls).model, a->pose, cfg.dist_thresh);
        for (std::size_t k = 0; k < g.idx.size(); ++k) {
          if (!keep[k]) continue;
          labels.semantic[g.idx[k]] = static_cast<int>(a->cls);
          labels.instance[g.idx[k]] = inst.id;
          ++inst.n_points;
        }
      } else {
        inst.cls = g.cls;
        for (const auto i : g.idx) labels.instance[i] = inst.id;
        inst.n_points = g.idx.size();
      }
      ann.instances.push_back(inst);
    }
    ann.sessions.push_back(std::move(labels));
  }
  return ann;
}

nlohmann::json annotation_to_json(const Annotation& a, const std::vector<std::string>& session_names) {
  using nlohmann::json;
  if (session_names.size() != a.sessions.size()) throw Error("annotation: session name count mismatch");
  json j;
  j["format"] = 1;
  j["categories"] = {"ground", "permanent", "movable", "dynamic"};
  j["classes"] = {"chair", "table"};
  j["sessions"] = json::array();
  for (std::size_t s = 0; s < a.sessions.size(); ++s) {
    const auto& l = a.sessions[s];
    std::vector<int> cat(l.category.size());
    std::transform(l.category.begin(), l.category.end(), cat.begin(), [](Category c) { return static_cast<int>(c); });
    j["sessions"].push_back({{"source", session_names[s]},
                             {"points", l.category.size()},
                             {"category", cat},
                             {"semantic", l.semantic},
                             {"instance", l.instance}});
  }
  j["instances"] = json::array();
  for (const auto& i : a.instances) {
    j["instances"].push_back({{"id", i.id},
                              {"session", i.session},
                              {"class", i.cls ? json(to_string(*i.cls)) : json(nullptr)},
                              {"aligned", i.aligned},
                              {"manual", i.manual},
                              {"pose", {{"x", i.pose.x}, {"y", i.pose.y}, {"z", i.pose.z}, {"yaw", i.pose.yaw}}},
                              {"box",
                               {{"center", {i.box.center.x(), i.box.center.y(), i.box.center.z()}},
                                {"size", {i.box.size.x(), i.box.size.y(), i.box.size.z()}},
                                {"yaw", i.box.yaw}}},
                              {"residual", i.residual},
                              {"points", i.n_points}});
  }
  return j;
}

void save_annotation(const Annotation& a, const std::vector<std::string>& session_names,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << annotation_to_json(a, session_names).dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic sessions

SessionSetConfig::SessionSetConfig() {
  scene.bounds = {0.0, 0.0, 10.0, 8.0};
  scene.n_tables = 2;
  scene.n_chairs = 4;
  scene.min_separation = 0.6;
  scene.n_waypoints = 1;
}

Category category_of_label(int label) {
  if (label == kLabelGround) return Category::Ground;
  if (label == kLabelWall) return Category::Permanent;
  return Category::Movable;
}

SessionSet make_sessions(const SessionSetConfig& cfg) {
  if (cfg.n_sessions < 2) throw Error("make_sessions: need at least two sessions");
  if (cfg.grid_cols < 1 || cfg.grid_rows < 1) throw Error("make_sessions: empty scan grid");
  SessionSet set;
  std::uint64_t seed = cfg.scene.seed;
  for (int s = 0; s < cfg.n_sessions; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      SceneConfig sc = cfg.scene;
      sc.seed = seed * 0x2545F4914F6CDD1DULL + static_cast<std::uint64_t>(s) * 1000003ULL + attempt;
      Scene candidate = randomize_scene(sc);
      placed = true;
      for (const auto& prev : set.scenes) {
        for (const auto& o : candidate.objects) {
          for (const auto& p : prev.objects) {
            if (footprint_distance(o.box(), p.box()) < cfg.move_clearance) placed = false;
          }
        }
      }
      if (placed) set.scenes.push_back(std::move(candidate));
    }
    if (!placed) throw Error("make_sessions: could not rearrange objects");
  }

  const Rect& b = cfg.scene.bounds;
  for (int r = 0; r < cfg.grid_rows; ++r) {
    for (int c = 0; c < cfg.grid_cols; ++c) {
      const Vec2 p(b.xmin + b.width() * (c + 1) / (cfg.grid_cols + 1),
                   b.ymin + b.height() * (r + 1) / (cfg.grid_rows + 1));
      auto clear = [&](const Vec2& q) {
        return std::all_of(set.scenes.begin(), set.scenes.end(),
                           [&](const Scene& sc) { return obstacle_clearance(sc, q) >= 0.4; });
      };
      // Nudge blocked grid points to the nearest clear spot on rings of 0.2 m steps.
      std::optional<Vec2> spot;
      for (int ring = 0; ring <= 5 && !spot; ++ring) {
        const int n = ring == 0 ? 1 : 8 * ring;
        for (int k = 0; k < n && !spot; ++k) {
          const double a = 2.0 * kPi * k / n;
          const Vec2 q = p + 0.2 * ring * Vec2(std::cos(a), std::sin(a));
          if (clear(q)) spot = q;
        }
      }
      if (spot) set.scan_poses.push_back({spot->x(), spot->y(), 0.0, 0.0});
    }
  }
  if (set.scan_poses.empty()) throw Error("make_sessions: no clear scan position");

  for (std::size_t s = 0; s < set.scenes.size(); ++s) {
    std::mt19937_64 rng(seed * 31 + s + 1);
    const RayCaster caster(set.scenes[s]);
    PointCloud world;
    for (const auto& pose : set.scan_poses) {
      const Pose3 sensor = sensor_pose_for(pose, cfg.lidar);
      world.append(scan(caster, sensor, cfg.lidar, rng).transformed(sensor));
    }
    set.clouds.push_back(std::move(world));
  }
  return set;
}

}  // namespace oanav
