#include "oanav/lidar.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace oanav {

void LidarConfig::validate() const {
  if (n_beams < 1) throw Error("lidar: n_beams must be >= 1");
  if (!(max_range > 0.0)) throw Error("lidar: max_range must be positive");
  if (!(horizontal_step > 0.0)) throw Error("lidar: horizontal_step must be positive");
  if (fov_upper < fov_lower) throw Error("lidar: fov_upper below fov_lower");
  if (range_noise_sigma < 0.0) throw Error("lidar: negative range noise");
}

RayCaster::RayCaster(const Scene& scene, bool include_ground) : walls_(scene.walls), ground_(include_ground) {
  for (const auto& o : scene.objects) {
    const auto key = std::make_pair(static_cast<int>(o.cls), o.model_seed);
    auto it = models_.find(key);
    if (it == models_.end()) {
      const CadModel cad = make_model(o.cls, o.model_seed);
      auto model = std::make_unique<Model>();
      for (const auto& p : cad.parts) model->parts.push_back({p, {}});
      for (const auto& t : cad.mesh) {
        const Vec3 c = (t.a + t.b + t.c) / 3.0;
        for (auto& part : model->parts) {
          const Aabb grown{part.box.min.array() - 1e-9, part.box.max.array() + 1e-9};
          if (grown.contains(c)) {
            part.triangles.push_back(t);
            break;
          }
        }
      }
      it = models_.emplace(key, std::move(model)).first;
    }
    Aabb wb = o.box().aabb();
    wb.min.array() -= 1e-6;
    wb.max.array() += 1e-6;
    objects_.push_back({it->second.get(), o.pose.to_pose3().inverse(), wb, object_label(o.id)});
  }
}

std::optional<RayCaster::Hit> RayCaster::cast(const Vec3& origin, const Vec3& dir, double max_range) const {
  double best = max_range;
  int label = -1;
  if (ground_ && dir.z() < 0.0 && origin.z() > 0.0) {
    const double t = -origin.z() / dir.z();
    if (t < best) {
      best = t;
      label = kLabelGround;
    }
  }
  for (const auto& w : walls_) {
    const auto t = ray_aabb_hit(origin, dir, w);
    if (t && *t > 0.0 && *t < best) {
      best = *t;
      label = kLabelWall;
    }
  }
  for (const auto& o : objects_) {
    const auto entry = ray_aabb_hit(origin, dir, o.world_box);
    if (!entry || *entry >= best) continue;
    const Vec3 lo = o.world_to_local.apply(origin);
    const Vec3 ld = o.world_to_local.rotate(dir);
    for (const auto& part : o.model->parts) {
      const auto pe = ray_aabb_hit(lo, ld, part.box);
      if (!pe || *pe >= best) continue;
      for (const auto& tri : part.triangles) {
        const auto t = ray_triangle_hit(lo, ld, tri);
        if (t && *t < best) {
          best = *t;
          label = o.label;
        }
      }
    }
  }
  if (label < 0) return std::nullopt;
  return Hit{best, label};
}

Pose3 sensor_pose_for(const YawPose& base, const LidarConfig& cfg) {
  YawPose s = base;
  s.z = base.z + cfg.mount_height;
  return s.to_pose3();
}

PointCloud scan(const RayCaster& caster, const Pose3& sensor_pose, const LidarConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  PointCloud out;
  const int n_az = std::max(1, static_cast<int>(std::lround(2.0 * kPi / cfg.horizontal_step)));
  const double az_step = 2.0 * kPi / n_az;
  std::normal_distribution<double> noise(0.0, 1.0);
  out.points.reserve(static_cast<std::size_t>(n_az) * cfg.n_beams / 2);
  out.labels.reserve(out.points.capacity());
  for (int b = 0; b < cfg.n_beams; ++b) {
    const double el = cfg.n_beams == 1 ? 0.5 * (cfg.fov_lower + cfg.fov_upper)
                                       : cfg.fov_lower + b * (cfg.fov_upper - cfg.fov_lower) / (cfg.n_beams - 1);
    const double ce = std::cos(el);
    const double se = std::sin(el);
    for (int a = 0; a < n_az; ++a) {
      const double az = a * az_step;
      const Vec3 d_s(ce * std::cos(az), ce * std::sin(az), se);
      const auto hit = caster.cast(sensor_pose.translation, sensor_pose.rotate(d_s), cfg.max_range);
      if (!hit) continue;
      double r = hit->range;
      if (cfg.range_noise_sigma > 0.0) r += cfg.range_noise_sigma * noise(rng);
      if (r <= 0.0 || r > cfg.max_range) continue;
      out.push_back(r * d_s, hit->label);
    }
  }
  return out;
}

PointCloud scan(const Scene& scene, const Pose3& sensor_pose, const LidarConfig& cfg, std::mt19937_64& rng) {
  const RayCaster caster(scene);
  return scan(caster, sensor_pose, cfg, rng);
}

PointCloud accumulate(std::span<const Keyframe> frames) {
  PointCloud out;
  if (frames.empty()) return out;
  const Pose3 latest_inv = frames.back().pose.inverse();
  for (const auto& f : frames) {
    if (&f == &frames.back()) {
      out.append(f.cloud);
    } else {
      out.append(f.cloud.transformed(latest_inv * f.pose));
    }
  }
  return out;
}

Accumulator::Accumulator(std::size_t window) : window_(window) {
  if (window_ == 0) throw Error("accumulator window must be >= 1");
}

void Accumulator::push(Keyframe frame) {
  frames_.push_back(std::move(frame));
  while (frames_.size() > window_) frames_.pop_front();
}

PointCloud Accumulator::cloud() const {
  const std::vector<Keyframe> v(frames_.begin(), frames_.end());
  return accumulate(v);
}

const Keyframe& Accumulator::latest() const {
  if (frames_.empty()) throw Error("accumulator is empty");
  return frames_.back();
}

namespace {

std::size_t count_inliers(const std::vector<Vec3>& pts, const Plane& pl, double dist) {
  std::size_t n = 0;
  for (const auto& p : pts) n += std::abs(pl.distance(p)) <= dist;
  return n;
}

Plane fit_plane(const std::vector<Vec3>& pts, const Plane& pl, double dist) {
  Vec3 mean = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& p : pts) {
    if (std::abs(pl.distance(p)) <= dist) {
      mean += p;
      ++n;
    }
  }
  if (n < 3) return pl;
  mean /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) {
    if (std::abs(pl.distance(p)) <= dist) cov += (p - mean) * (p - mean).transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  Vec3 normal = es.eigenvectors().col(0);
  if (normal.dot(pl.normal) < 0.0) normal = -normal;
  return {normal, -normal.dot(mean)};
}

}  // namespace

GroundFit detect_ground(const PointCloud& cloud, const GroundConfig& cfg) {
  const auto& pts = cloud.points;
  if (pts.size() < 3) throw Error("detect_ground: need at least 3 points");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  Plane best;
  std::size_t best_count = 0;
  const double min_cos = std::cos(cfg.max_tilt_deg * kDeg);
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    const std::size_t k = pick(rng);
    if (i == j || j == k || i == k) continue;
    Vec3 n = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
    const double len = n.norm();
    if (len < 1e-9) continue;
    n /= len;
    if (n.z() < 0.0) n = -n;
    if (n.z() < min_cos) continue;
    const Plane cand{n, -n.dot(pts[i])};
    const std::size_t c = count_inliers(pts, cand, cfg.inlier_dist);
    if (c > best_count) {
      best_count = c;
      best = cand;
    }
  }
  if (best_count == 0) throw Error("detect_ground: no plane hypothesis found");
  Plane refined = fit_plane(pts, best, cfg.inlier_dist);
  if (refined.normal.z() < 0.0) refined = {-refined.normal, -refined.offset};
  GroundFit fit{refined, count_inliers(pts, refined, cfg.inlier_dist)};
  if (static_cast<double>(fit.inliers) < cfg.min_inlier_ratio * static_cast<double>(pts.size())) {
    throw Error("detect_ground: inlier ratio below threshold");
  }
  return fit;
}

PointCloud filter_cloud(const PointCloud& cloud, const Plane& ground, double ceiling_height, double inlier_dist) {
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double h = ground.distance(cloud.points[i]);
    if (h > inlier_dist && h <= ceiling_height) keep.push_back(i);
  }
  return cloud.subset(keep);
}

// ---------------------------------------------------------------------------
// OAPC: "OAPC", u32 version, u64 count, then count x {f32 x, y, z; u16 label}.

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>(u & 0xFF);
    if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw Error("oapc: truncated file");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | buf[i]);
  return static_cast<T>(u);
}

constexpr std::uint32_t kOapcVersion = 1;

}  // namespace

void write_oapc(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("OAPC", 4);
  put_le<std::uint32_t>(out, kOapcVersion);
  put_le<std::uint64_t>(out, cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    for (int k = 0; k < 3; ++k) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(p[k])));
    const int label = cloud.has_labels() ? std::clamp(cloud.labels[i], 0, 65535) : 0;
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(label));
  }
  if (!out) throw Error("write failed: " + path.string());
}

PointCloud read_oapc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "OAPC", 4) != 0) throw Error("oapc: bad magic in " + path.string());
  const auto version = get_le<std::uint32_t>(in);
  if (version != kOapcVersion) throw Error("oapc: unsupported version " + std::to_string(version));
  const auto count = get_le<std::uint64_t>(in);
  const auto size = std::filesystem::file_size(path);
  if (size != 16 + count * 14) throw Error("oapc: size does not match point count");
  PointCloud cloud;
  cloud.points.reserve(count);
  cloud.labels.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = std::bit_cast<float>(get_le<std::uint32_t>(in));
    cloud.push_back(p, get_le<std::uint16_t>(in));
  }
  return cloud;
}

void write_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(9);
  for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

}  // namespace oanav
