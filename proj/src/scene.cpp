#include "oanav/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <set>

namespace oanav {

namespace {

struct ChairDims {
  double depth = 0.5;
  double width = 0.5;
  double seat_height = 0.42;
  double seat_thickness = 0.05;
  double back_height = 0.90;
  double back_thickness = 0.05;
  double leg = 0.04;
};

struct TableDims {
  double length = 1.2;
  double width = 0.8;
  double height = 0.75;
  double top_thickness = 0.04;
  double leg = 0.05;
  double leg_inset = 0.03;
};

// Seed 0 is the canonical model; other seeds jitter dimensions by a few cm.
ChairDims chair_dims(std::uint64_t seed) {
  ChairDims d;
  if (seed == 0) return d;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> j(-1.0, 1.0);
  d.depth += 0.02 * j(rng);
  d.width += 0.02 * j(rng);
  d.seat_height += 0.02 * j(rng);
  d.back_height += 0.03 * j(rng);
  return d;
}

TableDims table_dims(std::uint64_t seed) {
  TableDims d;
  if (seed == 0) return d;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> j(-1.0, 1.0);
  d.length += 0.04 * j(rng);
  d.width += 0.03 * j(rng);
  d.height += 0.02 * j(rng);
  return d;
}

enum Face : unsigned { kNegX = 1, kPosX = 2, kNegY = 4, kPosY = 8, kNegZ = 16, kPosZ = 32 };

void add_cuboid(CadModel& m, const Vec3& lo, const Vec3& hi, unsigned skip = 0) {
  m.parts.push_back({lo, hi});
  const Vec3 center = 0.5 * (lo + hi);
  auto quad = [&](const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    Triangle t1{a, b, c};
    Triangle t2{a, c, d};
    const Vec3 face_center = 0.25 * (a + b + c + d);
    if (t1.normal().dot(face_center - center) < 0.0) {
      std::swap(t1.b, t1.c);
      std::swap(t2.b, t2.c);
    }
    m.mesh.push_back(t1);
    m.mesh.push_back(t2);
  };
  const double x0 = lo.x(), y0 = lo.y(), z0 = lo.z();
  const double x1 = hi.x(), y1 = hi.y(), z1 = hi.z();
  if (!(skip & kNegX)) quad({x0, y0, z0}, {x0, y1, z0}, {x0, y1, z1}, {x0, y0, z1});
  if (!(skip & kPosX)) quad({x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1});
  if (!(skip & kNegY)) quad({x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1});
  if (!(skip & kPosY)) quad({x0, y1, z0}, {x1, y1, z0}, {x1, y1, z1}, {x0, y1, z1});
  if (!(skip & kNegZ)) quad({x0, y0, z0}, {x1, y0, z0}, {x1, y1, z0}, {x0, y1, z0});
  if (!(skip & kPosZ)) quad({x0, y0, z1}, {x1, y0, z1}, {x1, y1, z1}, {x0, y1, z1});
}

void finish_model(CadModel& m) {
  const double density = std::max(kModelSampleDensity, kMinModelSamples / m.surface_area() + 1.0);
  m.samples = sample_surface(m.mesh, density, m.seed * 2654435761ULL + 17);
}

}  // namespace

Aabb CadModel::bounds() const {
  Aabb b = Aabb::empty();
  for (const auto& t : mesh) {
    b.expand(t.a);
    b.expand(t.b);
    b.expand(t.c);
  }
  return b;
}

double CadModel::surface_area() const {
  double a = 0.0;
  for (const auto& t : mesh) a += t.area();
  return a;
}

CadModel make_chair(std::uint64_t seed) {
  const ChairDims d = chair_dims(seed);
  CadModel m;
  m.cls = ObjectClass::Chair;
  m.seed = seed;
  const double hx = 0.5 * d.depth;
  const double hy = 0.5 * d.width;
  const double seat_top = d.seat_height + d.seat_thickness;
  // Seat, then the back rest along the -x edge so the chair faces +x.
  add_cuboid(m, {-hx, -hy, d.seat_height}, {hx, hy, seat_top});
  add_cuboid(m, {-hx, -hy, seat_top}, {-hx + d.back_thickness, hy, d.back_height}, kNegZ);
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      const double cx = sx * (hx - 0.5 * d.leg);
      const double cy = sy * (hy - 0.5 * d.leg);
      add_cuboid(m, {cx - 0.5 * d.leg, cy - 0.5 * d.leg, 0.0},
                 {cx + 0.5 * d.leg, cy + 0.5 * d.leg, d.seat_height}, kPosZ);
    }
  }
  m.nominal_size = Vec3(d.depth, d.width, d.back_height);
  finish_model(m);
  return m;
}

CadModel make_table(std::uint64_t seed) {
  const TableDims d = table_dims(seed);
  CadModel m;
  m.cls = ObjectClass::Table;
  m.seed = seed;
  const double hx = 0.5 * d.length;
  const double hy = 0.5 * d.width;
  const double top_bottom = d.height - d.top_thickness;
  add_cuboid(m, {-hx, -hy, top_bottom}, {hx, hy, d.height});
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      const double cx = sx * (hx - d.leg_inset - 0.5 * d.leg);
      const double cy = sy * (hy - d.leg_inset - 0.5 * d.leg);
      add_cuboid(m, {cx - 0.5 * d.leg, cy - 0.5 * d.leg, 0.0},
                 {cx + 0.5 * d.leg, cy + 0.5 * d.leg, top_bottom}, kPosZ);
    }
  }
  m.nominal_size = Vec3(d.length, d.width, d.height);
  finish_model(m);
  return m;
}

CadModel make_model(ObjectClass cls, std::uint64_t seed) {
  return cls == ObjectClass::Chair ? make_chair(seed) : make_table(seed);
}

Vec3 nominal_size(ObjectClass cls, std::uint64_t seed) {
  if (cls == ObjectClass::Chair) {
    const ChairDims d = chair_dims(seed);
    return {d.depth, d.width, d.back_height};
  }
  const TableDims d = table_dims(seed);
  return {d.length, d.width, d.height};
}

PointCloud sample_surface(std::span<const Triangle> mesh, double density, std::uint64_t seed) {
  if (!(density > 0.0)) throw Error("sample_surface: density must be positive");
  std::vector<double> cdf;
  cdf.reserve(mesh.size());
  double total = 0.0;
  for (const auto& t : mesh) {
    total += t.area();
    cdf.push_back(total);
  }
  PointCloud out;
  if (mesh.empty() || total <= 0.0) return out;
  const auto n = static_cast<std::size_t>(std::llround(total * density));
  out.points.reserve(n);
  out.normals.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = uni(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    if (it == cdf.end()) --it;
    const Triangle& t = mesh[static_cast<std::size_t>(it - cdf.begin())];
    const double r1 = std::sqrt(uni(rng));
    const double r2 = uni(rng);
    out.points.push_back((1.0 - r1) * t.a + r1 * (1.0 - r2) * t.b + r1 * r2 * t.c);
    out.normals.push_back(t.normal());
  }
  return out;
}

PointCloud sample_surface(const CadModel& model, double density, std::uint64_t seed) {
  return sample_surface(model.mesh, density, seed);
}

double mesh_distance(std::span<const Triangle> mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh) best = std::min(best, (closest_point_on_triangle(p, t) - p).squaredNorm());
  return std::sqrt(best);
}

// ---------------------------------------------------------------------------
// Scene

OrientedBox3 SceneObject::box() const {
  const Vec3 size = nominal_size(cls, model_seed);
  return {Vec3(pose.x, pose.y, pose.z + 0.5 * size.z()), size, pose.yaw};
}

const SceneObject* Scene::find(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

namespace {

double segment_point_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

bool point_in_convex(const std::array<Vec2, 4>& poly, const Vec2& p) {
  for (int i = 0; i < 4; ++i) {
    const Vec2 e = poly[(i + 1) % 4] - poly[i];
    const Vec2 d = p - poly[i];
    if (e.x() * d.y() - e.y() * d.x() < 0.0) return false;
  }
  return true;
}

}  // namespace

double footprint_distance(const OrientedBox3& a, const OrientedBox3& b) {
  const auto pa = a.footprint();
  const auto pb = b.footprint();
  for (const auto& v : pa) {
    if (point_in_convex(pb, v)) return 0.0;
  }
  for (const auto& v : pb) {
    if (point_in_convex(pa, v)) return 0.0;
  }
  // Edge crossings without contained vertices.
  const double inter = convex_intersection_area({pa.begin(), pa.end()}, {pb.begin(), pb.end()});
  if (inter > 0.0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (const auto& v : pb) best = std::min(best, segment_point_distance(pa[i], pa[(i + 1) % 4], v));
    for (const auto& v : pa) best = std::min(best, segment_point_distance(pb[i], pb[(i + 1) % 4], v));
  }
  return best;
}

namespace {

double rect_point_distance(const Aabb& box, const Vec2& p) {
  const double dx = std::max({box.min.x() - p.x(), 0.0, p.x() - box.max.x()});
  const double dy = std::max({box.min.y() - p.y(), 0.0, p.y() - box.max.y()});
  return std::hypot(dx, dy);
}

double object_point_distance(const SceneObject& o, const Vec2& p) {
  const Vec3 size = nominal_size(o.cls, o.model_seed);
  const Vec2 local = to_object_frame(o.pose, p);
  const double dx = std::max(std::abs(local.x()) - 0.5 * size.x(), 0.0);
  const double dy = std::max(std::abs(local.y()) - 0.5 * size.y(), 0.0);
  return std::hypot(dx, dy);
}

}  // namespace

void Scene::validate(double min_separation) const {
  std::set<int> ids;
  for (const auto& o : objects) {
    if (!ids.insert(o.id).second) throw Error("scene: duplicate object id " + std::to_string(o.id));
    if (o.pose.z != 0.0) throw Error("scene: object not on the ground plane");
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      if (footprint_distance(objects[i].box(), objects[j].box()) < min_separation - 1e-9) {
        throw Error("scene: objects " + std::to_string(objects[i].id) + " and " +
                    std::to_string(objects[j].id) + " overlap");
      }
    }
  }
}

double obstacle_clearance(const Scene& scene, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : scene.walls) best = std::min(best, rect_point_distance(w, p));
  for (const auto& o : scene.objects) best = std::min(best, object_point_distance(o, p));
  return best;
}

bool in_risk_region(const Scene& scene, const AffordanceSet& aff, const Vec2& p) {
  for (const auto& o : scene.objects) {
    if (aff.get(o.cls).contains_local(to_object_frame(o.pose, p))) return true;
  }
  return false;
}

bool route_exists(const Scene& scene, double clearance, const AffordanceSet* avoid, double resolution) {
  const Rect& b = scene.bounds;
  const int w = static_cast<int>(std::ceil(b.width() / resolution));
  const int h = static_cast<int>(std::ceil(b.height() / resolution));
  auto center = [&](int ix, int iy) {
    return Vec2(b.xmin + (ix + 0.5) * resolution, b.ymin + (iy + 0.5) * resolution);
  };
  std::vector<char> free(static_cast<std::size_t>(w) * h, 0);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const Vec2 c = center(ix, iy);
      bool ok = obstacle_clearance(scene, c) >= clearance;
      if (ok && avoid) ok = !in_risk_region(scene, *avoid, c);
      free[static_cast<std::size_t>(iy) * w + ix] = ok;
    }
  }
  auto cell_of = [&](const Vec2& p) {
    const int ix = std::clamp(static_cast<int>(std::floor((p.x() - b.xmin) / resolution)), 0, w - 1);
    const int iy = std::clamp(static_cast<int>(std::floor((p.y() - b.ymin) / resolution)), 0, h - 1);
    return iy * w + ix;
  };
  const int start = cell_of({scene.robot_start.x, scene.robot_start.y});
  if (!free[start]) return false;
  std::vector<char> seen(free.size(), 0);
  std::deque<int> queue{start};
  seen[start] = 1;
  while (!queue.empty()) {
    const int c = queue.front();
    queue.pop_front();
    const int cx = c % w;
    const int cy = c / w;
    const int nx[4] = {cx + 1, cx - 1, cx, cx};
    const int ny[4] = {cy, cy, cy + 1, cy - 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
      const int n = ny[k] * w + nx[k];
      if (!free[n] || seen[n]) continue;
      seen[n] = 1;
      queue.push_back(n);
    }
  }
  return std::all_of(scene.waypoints.begin(), scene.waypoints.end(),
                     [&](const Vec2& p) { return seen[cell_of(p)] != 0; });
}

// ---------------------------------------------------------------------------
// Scene generation

namespace {

constexpr double kWallThickness = 0.2;
constexpr double kWallHeight = 2.5;

class Placer {
 public:
  Placer(const SceneConfig& cfg, Scene& scene, std::mt19937_64& rng) : cfg_(cfg), scene_(scene), rng_(rng) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  bool try_add(ObjectClass cls, const YawPose& pose) {
    SceneObject o{cls, pose, 0, next_id_};
    const OrientedBox3 box = o.box();
    const double sep = cfg_.min_separation;
    const Rect& b = cfg_.bounds;
    for (const auto& c : box.footprint()) {
      if (c.x() < b.xmin + kWallThickness + sep || c.x() > b.xmax - kWallThickness - sep ||
          c.y() < b.ymin + kWallThickness + sep || c.y() > b.ymax - kWallThickness - sep) {
        return false;
      }
    }
    for (const auto& other : scene_.objects) {
      if (footprint_distance(box, other.box()) < sep) return false;
    }
    // Keep the start and waypoints usable by every planner variant.
    const AffordanceSpec keepout = cfg_.affordance.get(cls).padded(cfg_.risk_margin + 0.3);
    std::vector<Vec2> keys{{scene_.robot_start.x, scene_.robot_start.y}};
    keys.insert(keys.end(), scene_.waypoints.begin(), scene_.waypoints.end());
    for (const auto& k : keys) {
      if (object_point_distance(o, k) < 3.0 * cfg_.robot_radius + 0.15) return false;
      if (keepout.contains_local(to_object_frame(pose, k))) return false;
    }
    scene_.objects.push_back(o);
    ++next_id_;
    return true;
  }

  bool scatter(ObjectClass cls, int tries, double band_center, double band_half) {
    const Rect& b = cfg_.bounds;
    for (int t = 0; t < tries; ++t) {
      YawPose p;
      p.x = uniform(b.xmin + 0.5, b.xmax - 0.5);
      p.y = uniform(b.ymin + 0.5, b.ymax - 0.5);
      p.yaw = wrap_angle(uniform(-kPi, kPi));
      if (band_half > 0.0 && std::abs(p.x - band_center) < band_half) continue;
      if (try_add(cls, p)) return true;
    }
    return false;
  }

  // Chair pulled up to one of the long sides of a table, facing it.
  bool chair_at_table(const SceneObject& table, double along, int side, double yaw_jitter) {
    const Vec3 tsize = nominal_size(ObjectClass::Table, table.model_seed);
    const double off = 0.5 * tsize.y() + 0.35;
    const double c = std::cos(table.pose.yaw);
    const double s = std::sin(table.pose.yaw);
    const double lx = along;
    const double ly = side * off;
    YawPose p;
    p.x = table.pose.x + c * lx - s * ly;
    p.y = table.pose.y + s * lx + c * ly;
    p.yaw = wrap_angle(table.pose.yaw - side * kPi / 2.0 + yaw_jitter);
    return try_add(ObjectClass::Chair, p);
  }

  int next_id() const { return next_id_; }

 private:
  const SceneConfig& cfg_;
  Scene& scene_;
  std::mt19937_64& rng_;
  int next_id_ = 0;
};

Scene empty_room(const SceneConfig& cfg, std::mt19937_64& rng) {
  Scene scene;
  const Rect& b = cfg.bounds;
  scene.bounds = b;
  scene.density = cfg.density;
  const double t = kWallThickness;
  scene.walls = {
      {{b.xmin, b.ymin, 0.0}, {b.xmax, b.ymin + t, kWallHeight}},
      {{b.xmin, b.ymax - t, 0.0}, {b.xmax, b.ymax, kWallHeight}},
      {{b.xmin, b.ymin, 0.0}, {b.xmin + t, b.ymax, kWallHeight}},
      {{b.xmax - t, b.ymin, 0.0}, {b.xmax, b.ymax, kWallHeight}},
  };
  std::uniform_real_distribution<double> ys(b.ymin + 1.2, b.ymax - 1.2);
  scene.robot_start = {b.xmin + 1.0, ys(rng), 0.0, 0.0};
  return scene;
}

// Coarse grid used to compare the shortest route with the shortest
// affordance-free route between candidate waypoints.
class RouteGrid {
 public:
  RouteGrid(const Scene& scene, const SceneConfig& cfg, double res) : b_(scene.bounds), res_(res) {
    w_ = static_cast<int>(std::ceil(b_.width() / res));
    h_ = static_cast<int>(std::ceil(b_.height() / res));
    const AffordanceSet avoid = cfg.affordance.padded(cfg.risk_margin);
    const std::size_t n = static_cast<std::size_t>(w_) * h_;
    free_.assign(n, 0);
    risky_.assign(n, 0);
    avoid_.assign(n, 0);
    for (int i = 0; i < static_cast<int>(n); ++i) {
      const Vec2 c = center(i);
      free_[i] = obstacle_clearance(scene, c) >= cfg.robot_radius + 0.1;
      risky_[i] = in_risk_region(scene, cfg.affordance, c);
      avoid_[i] = in_risk_region(scene, avoid, c);
    }
  }

  int cell(const Vec2& p) const {
    const int ix = std::clamp(static_cast<int>(std::floor((p.x() - b_.xmin) / res_)), 0, w_ - 1);
    const int iy = std::clamp(static_cast<int>(std::floor((p.y() - b_.ymin) / res_)), 0, h_ - 1);
    return iy * w_ + ix;
  }
  Vec2 center(int i) const { return {b_.xmin + (i % w_ + 0.5) * res_, b_.ymin + (i / w_ + 0.5) * res_}; }

  struct Route {
    double length = std::numeric_limits<double>::infinity();
    double risky_length = 0.0;
  };

  // 8-connected Dijkstra.
  Route shortest(const Vec2& from, const Vec2& to, bool avoid_risk) const {
    const int s = cell(from);
    const int g = cell(to);
    auto open_cell = [&](int i) { return free_[i] && !(avoid_risk && avoid_[i]); };
    Route r;
    if (!open_cell(s) || !open_cell(g)) return r;
    std::vector<double> dist(free_.size(), std::numeric_limits<double>::infinity());
    std::vector<int> parent(free_.size(), -1);
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    dist[s] = 0.0;
    open.emplace(0.0, s);
    while (!open.empty()) {
      const auto [d, i] = open.top();
      open.pop();
      if (d > dist[i]) continue;
      if (i == g) break;
      const int x = i % w_;
      const int y = i / w_;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || x + dx < 0 || y + dy < 0 || x + dx >= w_ || y + dy >= h_) continue;
          const int j = (y + dy) * w_ + x + dx;
          if (!open_cell(j)) continue;
          const double nd = d + res_ * ((dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0);
          if (nd < dist[j]) {
            dist[j] = nd;
            parent[j] = i;
            open.emplace(nd, j);
          }
        }
      }
    }
    if (!std::isfinite(dist[g])) return r;
    r.length = dist[g];
    for (int i = g; parent[i] >= 0; i = parent[i]) {
      if (risky_[i] || risky_[parent[i]]) r.risky_length += (center(i) - center(parent[i])).norm();
    }
    return r;
  }

 private:
  Rect b_;
  double res_;
  int w_ = 0;
  int h_ = 0;
  std::vector<char> free_, risky_, avoid_;
};

// Waypoints alternate between the far and near ends of the room. Among a few
// admissible candidates, prefer the one whose shortest route crosses the most
// affordance area while an affordance-free route stays within 10% of its length.
bool choose_waypoints(const SceneConfig& cfg, Scene& scene, std::mt19937_64& rng) {
  const Rect& b = cfg.bounds;
  const RouteGrid grid(scene, cfg, 0.1);
  const AffordanceSet keepout = cfg.affordance.padded(cfg.risk_margin + 0.3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto admissible = [&](const Vec2& p) {
    if (obstacle_clearance(scene, p) < 3.0 * cfg.robot_radius + 0.15) return false;
    return !in_risk_region(scene, keepout, p);
  };
  Vec2 prev(scene.robot_start.x, scene.robot_start.y);
  for (int i = 0; i < cfg.n_waypoints; ++i) {
    const bool far = i % 2 == 0;
    std::optional<Vec2> best;
    double best_score = -std::numeric_limits<double>::infinity();
    int found = 0;
    for (int draw = 0; draw < 200 && found < 8; ++draw) {
      const double x = far ? b.xmax - 0.8 - 1.2 * uni(rng) : b.xmin + 0.8 + 1.2 * uni(rng);
      const Vec2 c(x, b.ymin + 1.0 + (b.height() - 2.0) * uni(rng));
      if (!admissible(c)) continue;
      const auto safe = grid.shortest(prev, c, true);
      if (!std::isfinite(safe.length)) continue;
      ++found;
      const auto direct = grid.shortest(prev, c, false);
      const double detour = safe.length / direct.length;
      const double score = detour <= 1.1 ? direct.risky_length : -detour;
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    if (!best) return false;
    scene.waypoints.push_back(*best);
    prev = *best;
  }
  return true;
}

// Row of tables spanning the room along y at x = x_row, leaving one or two
// gaps a robot can pass but narrower than 3x-inflated clearance allows.
bool place_row(const SceneConfig& cfg, Placer& placer, Scene& scene, std::mt19937_64& rng, double x_row,
               int& tables_left, int& chairs_left) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double table_len = nominal_size(ObjectClass::Table, 0).x();
  const double y_lo = cfg.bounds.ymin + kWallThickness;
  const double y_hi = cfg.bounds.ymax - kWallThickness;
  const double span = y_hi - y_lo;
  const int n_pass = uni(rng) < 0.5 ? 1 : 2;

  for (int attempt = 0; attempt < 20; ++attempt) {
    std::vector<double> pass(n_pass);
    double pass_total = 0.0;
    for (auto& g : pass) {
      g = 1.0 + 0.3 * uni(rng);
      pass_total += g;
    }
    const double remaining = span - pass_total;
    for (int n = 1; n <= tables_left; ++n) {
      const int n_small = n + 1 - n_pass;
      if (n_small < 0) continue;
      const double leftover = remaining - n * table_len;
      if (leftover < 0.0) break;
      const double small = n_small > 0 ? leftover / n_small : 0.0;
      if (n_small == 0 && leftover > 1e-9) continue;
      if (small < cfg.min_separation + 0.02 || small > 0.4) continue;

      // Choose which of the n+1 slots are passable.
      std::vector<int> slots(n + 1);
      for (int i = 0; i <= n; ++i) slots[i] = i;
      std::shuffle(slots.begin(), slots.end(), rng);
      std::vector<double> gaps(n + 1, small);
      for (int k = 0; k < n_pass; ++k) gaps[slots[k]] = pass[k];

      double y = y_lo;
      std::vector<int> table_ids;
      for (int i = 0; i < n; ++i) {
        y += gaps[i];
        const YawPose p{x_row, y + 0.5 * table_len, 0.0, kPi / 2.0};
        const int id = placer.next_id();
        if (!placer.try_add(ObjectClass::Table, p)) return false;
        table_ids.push_back(id);
        y += table_len;
      }
      tables_left -= n;
      for (const int id : table_ids) {
        for (const int side : {1, -1}) {
          if (chairs_left <= 0) break;
          const SceneObject* t = scene.find(id);
          const double jitter = 0.3 * (uni(rng) - 0.5);
          if (placer.chair_at_table(*t, 0.0, side, jitter)) --chairs_left;
        }
      }
      return true;
    }
  }
  return false;
}

std::optional<Scene> try_generate(const SceneConfig& cfg, std::uint64_t attempt_seed) {
  std::mt19937_64 rng(attempt_seed);
  Scene scene = empty_room(cfg, rng);
  Placer placer(cfg, scene, rng);
  int tables_left = cfg.n_tables;
  int chairs_left = cfg.n_chairs;
  double band_center = 0.0;
  double band_half = 0.0;

  if (cfg.layout == Layout::Rows) {
    std::uniform_real_distribution<double> frac(0.42, 0.58);
    band_center = cfg.bounds.xmin + cfg.bounds.width() * frac(rng);
    band_half = 2.2;
    if (!place_row(cfg, placer, scene, rng, band_center, tables_left, chairs_left)) return std::nullopt;
  }

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::size_t first_scatter_table = scene.objects.size();
  for (; tables_left > 0; --tables_left) {
    if (!placer.scatter(ObjectClass::Table, 200, band_center, band_half)) return std::nullopt;
  }
  for (; chairs_left > 0; --chairs_left) {
    bool placed = false;
    const std::size_t n_scatter_tables = scene.objects.size() - first_scatter_table;
    if (n_scatter_tables > 0 && uni(rng) < 0.5) {
      for (int t = 0; t < 10 && !placed; ++t) {
        const std::size_t pick = first_scatter_table + static_cast<std::size_t>(uni(rng) * n_scatter_tables);
        const SceneObject table = scene.objects[std::min(pick, scene.objects.size() - 1)];
        if (table.cls != ObjectClass::Table) break;
        const double along = (static_cast<int>(uni(rng) * 3.0) - 1) * 0.3;
        const int side = uni(rng) < 0.5 ? 1 : -1;
        placed = placer.chair_at_table(table, along, side, 0.3 * (uni(rng) - 0.5));
      }
    }
    if (!placed && !placer.scatter(ObjectClass::Chair, 200, band_center, band_half)) return std::nullopt;
  }

  if (!choose_waypoints(cfg, scene, rng)) return std::nullopt;
  const AffordanceSet padded = cfg.affordance.padded(cfg.risk_margin);
  if (!route_exists(scene, cfg.robot_radius + 0.1, &padded)) return std::nullopt;
  scene.conservative_feasible = route_exists(scene, 3.0 * cfg.robot_radius + 0.05, nullptr);
  return scene;
}

}  // namespace

Scene randomize_scene(const SceneConfig& cfg) {
  if (cfg.n_chairs < 0 || cfg.n_tables < 0) throw Error("randomize_scene: negative object count");
  if (cfg.bounds.width() < 4.0 || cfg.bounds.height() < 3.0) throw Error("randomize_scene: room too small");
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    const std::uint64_t s = cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(attempt) * 7919ULL + 1;
    if (auto scene = try_generate(cfg, s)) return *scene;
  }
  throw Error("randomize_scene: could not place objects after " + std::to_string(cfg.max_retries) + " attempts");
}

SceneConfig density_preset(const std::string& density, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.density = density;
  if (density == "sparse") {
    cfg.bounds = {0.0, 0.0, 10.0, 7.0};
    cfg.n_tables = 2;
    cfg.n_chairs = 6;
  } else if (density == "medium") {
    cfg.bounds = {0.0, 0.0, 12.0, 8.0};
    cfg.n_tables = 4;
    cfg.n_chairs = 12;
  } else if (density == "dense") {
    cfg.bounds = {0.0, 0.0, 14.0, 9.0};
    cfg.layout = Layout::Rows;
    cfg.n_tables = 7;
    cfg.n_chairs = 18;
  } else {
    throw Error("unknown density preset: " + density);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

namespace {
json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
}  // namespace

json scene_to_json(const Scene& scene) {
  json j;
  j["format"] = 1;
  j["bounds"] = {{"xmin", scene.bounds.xmin}, {"ymin", scene.bounds.ymin},
                 {"xmax", scene.bounds.xmax}, {"ymax", scene.bounds.ymax}};
  j["walls"] = json::array();
  for (const auto& w : scene.walls) j["walls"].push_back({{"min", vec_json(w.min)}, {"max", vec_json(w.max)}});
  j["objects"] = json::array();
  for (const auto& o : scene.objects) {
    j["objects"].push_back({{"class", to_string(o.cls)},
                            {"x", o.pose.x},
                            {"y", o.pose.y},
                            {"yaw", o.pose.yaw},
                            {"model_seed", o.model_seed},
                            {"id", o.id}});
  }
  j["robot_start"] = {{"x", scene.robot_start.x}, {"y", scene.robot_start.y}, {"yaw", scene.robot_start.yaw}};
  j["waypoints"] = json::array();
  for (const auto& w : scene.waypoints) j["waypoints"].push_back(json::array({w.x(), w.y()}));
  j["conservative_feasible"] = scene.conservative_feasible;
  j["density"] = scene.density;
  return j;
}

Scene scene_from_json(const json& j) {
  if (j.value("format", 0) != 1) throw Error("scene file: unsupported format version");
  Scene s;
  const auto& b = j.at("bounds");
  s.bounds = {b.at("xmin").get<double>(), b.at("ymin").get<double>(), b.at("xmax").get<double>(),
              b.at("ymax").get<double>()};
  for (const auto& w : j.at("walls")) s.walls.push_back({json_vec(w.at("min")), json_vec(w.at("max"))});
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.cls = class_from_string(o.at("class").get<std::string>());
    obj.pose = {o.at("x").get<double>(), o.at("y").get<double>(), 0.0, o.at("yaw").get<double>()};
    obj.model_seed = o.value("model_seed", std::uint64_t{0});
    obj.id = o.at("id").get<int>();
    s.objects.push_back(obj);
  }
  const auto& st = j.at("robot_start");
  s.robot_start = {st.at("x").get<double>(), st.at("y").get<double>(), 0.0, st.value("yaw", 0.0)};
  for (const auto& w : j.at("waypoints")) s.waypoints.emplace_back(w.at(0).get<double>(), w.at(1).get<double>());
  s.conservative_feasible = j.value("conservative_feasible", true);
  s.density = j.value("density", std::string{});
  return s;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scene file " + path.string());
  out << scene_to_json(scene).dump(2) << '\n';
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read scene file " + path.string());
  return scene_from_json(json::parse(in));
}

json model_to_json(const CadModel& model) {
  json j;
  j["format"] = 1;
  j["class"] = to_string(model.cls);
  j["seed"] = model.seed;
  j["nominal_size"] = vec_json(model.nominal_size);
  j["parts"] = json::array();
  for (const auto& p : model.parts) j["parts"].push_back({{"min", vec_json(p.min)}, {"max", vec_json(p.max)}});
  j["triangles"] = json::array();
  for (const auto& t : model.mesh) {
    j["triangles"].push_back(json::array({t.a.x(), t.a.y(), t.a.z(), t.b.x(), t.b.y(), t.b.z(), t.c.x(), t.c.y(), t.c.z()}));
  }
  return j;
}

CadModel model_from_json(const json& j) {
  CadModel m;
  m.cls = class_from_string(j.at("class").get<std::string>());
  m.seed = j.value("seed", std::uint64_t{0});
  m.nominal_size = json_vec(j.at("nominal_size"));
  for (const auto& p : j.at("parts")) m.parts.push_back({json_vec(p.at("min")), json_vec(p.at("max"))});
  for (const auto& t : j.at("triangles")) {
    std::array<double, 9> v{};
    for (std::size_t i = 0; i < 9; ++i) v[i] = t.at(i).get<double>();
    m.mesh.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}});
  }
  finish_model(m);
  return m;
}

}  // namespace oanav
