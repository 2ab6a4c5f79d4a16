#include "oanav/detect.hpp"

#include "oanav/kdtree.hpp"
#include "oanav/lidar.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <ostream>

namespace oanav {

Detection Detection::make(const OrientedBox3& box, const ClassScores& scores, int source_id) {
  Detection d;
  d.box = box;
  double total = 0.0;
  for (const double s : scores) {
    if (!(s >= 0.0)) throw Error("detection: class scores must be non-negative");
    total += s;
  }
  if (total <= 0.0) throw Error("detection: class scores sum to zero");
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    d.class_scores[i] = scores[i] / total;
    if (d.class_scores[i] > d.class_scores[best]) best = i;
  }
  d.label = static_cast<ObjectClass>(best);
  d.confidence = d.class_scores[best];
  d.source_id = source_id;
  return d;
}

OracleNoise OracleNoise::exact() {
  OracleNoise n;
  n.sigma_center = 0.0;
  n.sigma_size = 0.0;
  n.sigma_yaw = 0.0;
  n.p_flip = 0.0;
  n.p_miss = 0.0;
  n.p_fp = 0.0;
  n.class_eps = 0.0;
  return n;
}

std::vector<Detection> detect_oracle(const Scene& scene, const Pose3& sensor_pose, const PointCloud& cloud,
                                     const OracleNoise& noise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Pose3 world_to_sensor = sensor_pose.inverse();
  const double sensor_yaw = YawPose::from_pose3(sensor_pose).yaw;

  std::map<int, std::size_t> counts;
  if (cloud.has_labels()) {
    for (const int l : cloud.labels) {
      if (l >= kLabelObjectBase) ++counts[l - kLabelObjectBase];
    }
  }

  std::vector<Detection> out;
  for (const auto& obj : scene.objects) {
    const OrientedBox3 world_box = obj.box();
    OrientedBox3 box{world_to_sensor.apply(world_box.center), world_box.size, wrap_angle(world_box.yaw - sensor_yaw)};
    if (box.center.norm() > noise.max_range) continue;
    std::size_t n = 0;
    if (cloud.has_labels()) {
      n = counts[obj.id];
    } else {
      for (const auto& p : cloud.points) n += box.contains(p, 0.02);
    }
    if (n < noise.min_points) continue;
    if (uni(rng) < noise.p_miss) continue;

    for (int k = 0; k < 3; ++k) box.center[k] += noise.sigma_center * gauss(rng);
    for (int k = 0; k < 3; ++k) box.size[k] = std::max(0.05, box.size[k] + noise.sigma_size * gauss(rng));
    box.yaw += noise.sigma_yaw * gauss(rng);
    if (uni(rng) < noise.p_flip) {
      const int k = 1 + static_cast<int>(std::min(2.0, std::floor(uni(rng) * 3.0)));
      box.yaw += k * kPi / 2.0;
    }
    box.yaw = wrap_angle(box.yaw);

    double eps = noise.class_eps > 0.0 ? std::abs(noise.class_eps * (1.0 + 0.5 * gauss(rng))) : 0.0;
    eps = std::min(eps, 0.45);
    ClassScores scores{};
    scores.fill(eps / (kNumClasses - 1));
    scores[static_cast<std::size_t>(obj.cls)] = 1.0 - eps;
    out.push_back(Detection::make(box, scores, obj.id));
  }

  if (noise.p_fp > 0.0 && uni(rng) < noise.p_fp) {
    // Spurious box somewhere in front of free floor.
    const double az = uni(rng) * 2.0 * kPi;
    const double range = 1.5 + 6.0 * uni(rng);
    const ObjectClass cls = uni(rng) < 0.5 ? ObjectClass::Chair : ObjectClass::Table;
    const Vec3 size = nominal_size(cls, 0);
    const double ground_z = -sensor_pose.translation.z();
    OrientedBox3 box{Vec3(range * std::cos(az), range * std::sin(az), ground_z + 0.5 * size.z()), size,
                     wrap_angle(uni(rng) * 2.0 * kPi)};
    const Vec3 world = sensor_pose.apply(box.center);
    bool clear = obstacle_clearance(scene, world.head<2>()) > 0.5 && scene.bounds.contains(world.head<2>());
    if (clear) {
      ClassScores scores{};
      scores.fill(0.4 / (kNumClasses - 1));
      scores[static_cast<std::size_t>(cls)] = 0.6;
      out.push_back(Detection::make(box, scores, -1));
    }
  }
  return out;
}

std::vector<int> dbscan(std::span<const Vec3> points, double eps, std::size_t min_pts) {
  std::vector<int> labels(points.size(), -2);  // -2 unvisited
  if (points.empty()) return {};
  const KdTree3 tree(points);
  std::vector<std::size_t> nbrs;
  std::vector<std::size_t> inner;
  int cluster = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != -2) continue;
    tree.radius(points[i], eps, nbrs);
    if (nbrs.size() < min_pts) {
      labels[i] = -1;
      continue;
    }
    labels[i] = cluster;
    std::deque<std::size_t> frontier(nbrs.begin(), nbrs.end());
    while (!frontier.empty()) {
      const std::size_t j = frontier.front();
      frontier.pop_front();
      if (labels[j] == -1) labels[j] = cluster;  // border point
      if (labels[j] != -2) continue;
      labels[j] = cluster;
      tree.radius(points[j], eps, inner);
      if (inner.size() >= min_pts) {
        for (const std::size_t k : inner) {
          if (labels[k] < 0) frontier.push_back(k);
        }
      }
    }
    ++cluster;
  }
  return labels;
}

std::vector<std::vector<std::size_t>> clusters_from_labels(const std::vector<int>& labels) {
  int n = 0;
  for (const int l : labels) n = std::max(n, l + 1);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

OrientedBox3 pca_box(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error("pca_box: need at least 3 points");
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p.head<2>();
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Vec2 d = p.head<2>() - mean;
    cov += d * d.transpose();
  }
  double yaw = 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const double big = es.eigenvalues()(1);
  const double small = es.eigenvalues()(0);
  if (big > 1e-12 && small > 1e-9 * big) {
    const Vec2 axis = es.eigenvectors().col(1);
    yaw = std::atan2(axis.y(), axis.x());
    if (yaw >= kPi / 2.0) yaw -= kPi;
    if (yaw < -kPi / 2.0) yaw += kPi;
  }
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : points) {
    const Vec3 q(c * p.x() + s * p.y(), -s * p.x() + c * p.y(), p.z());
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const Vec3 mid = 0.5 * (lo + hi);
  OrientedBox3 box;
  box.center = Vec3(c * mid.x() - s * mid.y(), s * mid.x() + c * mid.y(), mid.z());
  box.size = (hi - lo).cwiseMax(Vec3::Constant(1e-3));
  box.yaw = yaw;
  return box;
}

ClassScores size_class_scores(const OrientedBox3& box, double size_scale) {
  const double lng = std::max(box.size.x(), box.size.y());
  const double shrt = std::min(box.size.x(), box.size.y());
  ClassScores logits{};
  for (int c = 0; c < kNumClasses; ++c) {
    const Vec3 nom = nominal_size(static_cast<ObjectClass>(c), 0);
    const double nl = std::max(nom.x(), nom.y());
    const double ns = std::min(nom.x(), nom.y());
    const double d2 = std::pow(lng - nl, 2) + std::pow(shrt - ns, 2) + std::pow(box.size.z() - nom.z(), 2);
    logits[static_cast<std::size_t>(c)] = -d2 / (2.0 * size_scale * size_scale);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  ClassScores out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(logits[i] - mx);
  return out;
}

std::vector<Detection> detect_cluster(const PointCloud& cloud, const ClusterConfig& cfg) {
  std::vector<Detection> out;
  const auto labels = dbscan(cloud.points, cfg.eps, cfg.min_pts);
  for (const auto& idx : clusters_from_labels(labels)) {
    if (idx.size() < cfg.min_cluster) continue;
    std::vector<Vec3> pts;
    pts.reserve(idx.size());
    for (const auto i : idx) pts.push_back(cloud.points[i]);
    const OrientedBox3 box = pca_box(pts);
    out.push_back(Detection::make(box, size_class_scores(box, cfg.size_scale)));
  }
  return out;
}

void write_detection_header(std::ostream& out) { out << "frame,x,y,z,sx,sy,sz,yaw,label,confidence\n"; }

void write_detections(std::ostream& out, int frame, std::span<const Detection> dets) {
  char buf[256];
  for (const auto& d : dets) {
    std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.5f,%s,%.4f\n", frame, d.box.center.x(),
                  d.box.center.y(), d.box.center.z(), d.box.size.x(), d.box.size.y(), d.box.size.z(), d.box.yaw,
                  to_string(d.label).c_str(), d.confidence);
    out << buf;
  }
}

}  // namespace oanav
