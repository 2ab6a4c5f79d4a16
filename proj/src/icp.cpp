#include "oanav/icp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace oanav {

void IcpConfig::validate() const {
  if (levels.empty() || levels.size() != corr_max_dist.size() || levels.size() != step_tol.size()) {
    throw Error("icp: levels, corr_max_dist and step_tol must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw Error("icp: level strides must be >= 1");
    if (i > 0 && levels[i] > levels[i - 1]) throw Error("icp: levels must run coarse to fine");
    if (!(corr_max_dist[i] > 0.0)) throw Error("icp: gates must be positive");
    if (!(step_tol[i] >= 0.0)) throw Error("icp: step_tol must be non-negative");
  }
  if (!(e_min < e_max)) throw Error("icp: e_min must be below e_max");
  if (!(cauchy_scale > 0.0)) throw Error("icp: cauchy_scale must be positive");
  if (max_iters < 0) throw Error("icp: negative max_iters");
}

ModelIndex::ModelIndex(CadModel m) : model(std::move(m)), tree(model.samples.points) {
  if (model.samples.size() != model.samples.normals.size()) throw Error("model samples need normals");
}

CadDatabase::CadDatabase() : CadDatabase(std::vector<CadModel>{make_chair(0), make_table(0)}) {}

CadDatabase::CadDatabase(std::vector<CadModel> models) : by_class_(kNumClasses) {
  for (auto& m : models) {
    const auto c = static_cast<std::size_t>(m.cls);
    by_class_[c] = std::make_shared<const ModelIndex>(std::move(m));
  }
}

const ModelIndex& CadDatabase::get(ObjectClass cls) const {
  const auto& p = by_class_.at(static_cast<std::size_t>(cls));
  if (!p) throw Error("no CAD model for class " + to_string(cls));
  return *p;
}

Vec3 apply_increment(const Xi& xi, const Vec3& pivot, const Vec3& p) {
  return rot_z(xi[0]) * (p - pivot) + pivot + xi.tail<3>();
}

double point_plane_residual(const Xi& xi, const Vec3& pivot, const Vec3& q, const Vec3& n, const Vec3& p) {
  return n.dot(q - apply_increment(xi, pivot, p));
}

Eigen::RowVector4d point_plane_jacobian(const Xi& xi, const Vec3& pivot, const Vec3& n, const Vec3& p) {
  const double c = std::cos(xi[0]);
  const double s = std::sin(xi[0]);
  const Vec3 d = p - pivot;
  const Vec3 dR(-s * d.x() - c * d.y(), c * d.x() - s * d.y(), 0.0);
  Eigen::RowVector4d j;
  j << -n.dot(dR), -n.x(), -n.y(), -n.z();
  return j;
}

namespace {

struct Corr {
  Vec3 q;  // model point in the sensor frame
  Vec3 n;
  Vec3 p;  // scan point
};

double cauchy_cost(double r, double c) { return 0.5 * c * c * std::log1p((r / c) * (r / c)); }
double cauchy_weight(double r, double c) { return 1.0 / (1.0 + (r / c) * (r / c)); }

std::vector<Vec3> cap_points(const PointCloud& scan, std::size_t max_points) {
  std::vector<Vec3> pts;
  const std::size_t stride = scan.size() > max_points ? (scan.size() + max_points - 1) / max_points : 1;
  pts.reserve(scan.size() / stride + 1);
  for (std::size_t i = 0; i < scan.size(); i += stride) pts.push_back(scan.points[i]);
  return pts;
}

/// Nearest-sample lookup restricted to samples facing the viewpoint. The
/// visibility mask is refreshed once the pose has moved enough to change it.
class Matcher {
 public:
  Matcher(const ModelIndex& mi, const std::optional<Vec3>& viewpoint) : mi_(mi), viewpoint_(viewpoint) {}

  void update(const YawPose& pose) {
    if (!viewpoint_) return;
    if (built_ && std::abs(angle_diff(pose.yaw, at_.yaw)) < 2.0 * kPi / 180.0 &&
        (pose.position() - at_.position()).norm() < 0.05) {
      return;
    }
    const Vec3 v = pose.to_pose3().inverse().apply(*viewpoint_);
    const auto& s = mi_.model.samples;
    visible_.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) visible_[i] = s.normals[i].dot(v - s.points[i]) > 0.0;
    at_ = pose;
    built_ = true;
  }

  std::optional<std::size_t> nearest(const Vec3& q, double gate) const {
    const auto nn = mi_.tree.nearest(q, gate, viewpoint_ ? std::span<const char>(visible_) : std::span<const char>());
    return nn ? std::optional(nn->index) : std::nullopt;
  }

 private:
  const ModelIndex& mi_;
  std::optional<Vec3> viewpoint_;
  std::vector<char> visible_;
  YawPose at_;
  bool built_ = false;
};

std::vector<Corr> correspondences(const ModelIndex& mi, Matcher& matcher, std::span<const Vec3> pts,
                                  const YawPose& pose, double gate) {
  matcher.update(pose);
  const Pose3 t = pose.to_pose3();
  const Pose3 inv = t.inverse();
  std::vector<Corr> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    const auto i = matcher.nearest(inv.apply(p), gate);
    if (!i) continue;
    out.push_back({t.apply(mi.model.samples.points[*i]), t.rotate(mi.model.samples.normals[*i]), p});
  }
  return out;
}

double total_cost(const std::vector<Corr>& corr, const Xi& xi, const Vec3& pivot, double c) {
  double sum = 0.0;
  for (const auto& k : corr) sum += cauchy_cost(point_plane_residual(xi, pivot, k.q, k.n, k.p), c);
  return sum;
}

}  // namespace

IcpResult icp_refine(const ModelIndex& mi, const PointCloud& scan, const YawPose& init, const IcpConfig& cfg) {
  cfg.validate();
  if (scan.size() < 10) throw Error("icp: need at least 10 scan points");
  if (!std::isfinite(init.x) || !std::isfinite(init.y) || !std::isfinite(init.z) || !std::isfinite(init.yaw)) {
    throw Error("icp: non-finite initial pose");
  }
  const std::vector<Vec3> pts = cap_points(scan, cfg.max_points);
  const double c = cfg.cauchy_scale;

  IcpResult res;
  YawPose pose = init;
  Matcher all(mi, std::nullopt);
  Matcher visible(mi, cfg.viewpoint);
  for (std::size_t level = 0; level < cfg.levels.size(); ++level) {
    Matcher& matcher = level + 1 == cfg.levels.size() ? visible : all;
    std::vector<Vec3> lp;
    for (std::size_t i = 0; i < pts.size(); i += static_cast<std::size_t>(cfg.levels[level])) lp.push_back(pts[i]);
    if (lp.size() < 10) lp = pts;
    const double gate = cfg.corr_max_dist[level];

    for (int it = 0; it < cfg.max_iters; ++it) {
      const auto corr = correspondences(mi, matcher, lp, pose, gate);
      if (corr.size() < 4) throw Error("icp: too few correspondences within gate");
      Vec3 pivot = Vec3::Zero();
      for (const auto& k : corr) pivot += k.p;
      pivot /= static_cast<double>(corr.size());

      const Xi zero = Xi::Zero();
      Eigen::Matrix4d H = Eigen::Matrix4d::Zero();
      Eigen::Vector4d g = Eigen::Vector4d::Zero();
      double cost0 = 0.0;
      for (const auto& k : corr) {
        const double r = point_plane_residual(zero, pivot, k.q, k.n, k.p);
        const double w = cauchy_weight(r, c);
        const Eigen::RowVector4d J = point_plane_jacobian(zero, pivot, k.n, k.p);
        H += w * J.transpose() * J;
        g += w * J.transpose() * r;
        cost0 += cauchy_cost(r, c);
      }
      H.diagonal().array() += 1e-9;
      const Xi xi = -H.ldlt().solve(g);
      if (!xi.allFinite()) throw Error("icp: non-finite update");
      if (xi.cwiseAbs().maxCoeff() < 1e-8) break;

      double alpha = 1.0;
      double cost1 = total_cost(corr, xi, pivot, c);
      int halvings = 0;
      while (cost1 > cost0 && halvings < 12) {
        alpha *= 0.5;
        cost1 = total_cost(corr, alpha * xi, pivot, c);
        ++halvings;
      }
      if (cost1 > cost0) break;

      const Xi step = alpha * xi;
      // Scan points moved by dT line up with the model at T, so the model
      // pose in the scan frame becomes dT^-1 T.
      Pose3 dt;
      dt.rotation = rot_z(step[0]);
      dt.translation = pivot + step.tail<3>() - dt.rotation * pivot;
      pose = YawPose::from_pose3(dt.inverse() * pose.to_pose3());
      res.trace.push_back({cost0, cost1});
      ++res.iterations;
      if (step.cwiseAbs().maxCoeff() < cfg.step_tol[level]) break;
    }
  }

  const auto corr = correspondences(mi, visible, pts, pose, cfg.corr_max_dist.back());
  if (corr.empty()) throw Error("icp: no correspondences at the final pose");
  double wsum = 0.0;
  double wr = 0.0;
  for (const auto& k : corr) {
    const double r = k.n.dot(k.q - k.p);
    const double w = cauchy_weight(r, c);
    wsum += w;
    wr += w * std::abs(r);
  }
  res.pose = pose;
  res.residual = wr / wsum;
  res.inlier_ratio = static_cast<double>(corr.size()) / static_cast<double>(pts.size());
  return res;
}

IcpResult icp_refine(const CadModel& model, const PointCloud& scan, const YawPose& init, const IcpConfig& cfg) {
  const ModelIndex mi(model);
  return icp_refine(mi, scan, init, cfg);
}

double fit_score(const IcpResult& fit, const IcpConfig& cfg) {
  return fit.residual + (1.0 - fit.inlier_ratio) * cfg.corr_max_dist.back();
}

std::optional<IcpResult> icp_candidates(const ModelIndex& mi, const PointCloud& scan, const YawPose& init,
                                        const IcpConfig& cfg) {
  std::optional<IcpResult> best;
  const int n = cfg.use_orientation_candidates ? 4 : 1;
  for (int k = 0; k < n; ++k) {
    YawPose pose = init;
    pose.yaw = k == 0 ? init.yaw : wrap_angle(init.yaw + k * kPi / 2.0);
    try {
      IcpResult fit = icp_refine(mi, scan, pose, cfg);
      if (!best || fit_score(fit, cfg) < fit_score(*best, cfg)) best = std::move(fit);
    } catch (const Error&) {
    }
  }
  return best;
}

double orientation_residual(const ModelIndex& mi, std::span<const Vec3> scan, const YawPose& pose, double gate) {
  if (scan.empty()) throw Error("orientation_residual: empty scan");
  const Pose3 inv = pose.to_pose3().inverse();
  double sum = 0.0;
  for (const auto& p : scan) {
    const auto nn = mi.tree.nearest(inv.apply(p), gate);
    sum += nn ? std::sqrt(nn->dist2) : gate;
  }
  return sum / static_cast<double>(scan.size());
}

YawPose best_orientation_init(const ModelIndex& mi, const PointCloud& scan, const YawPose& pose0, double gate) {
  if (scan.size() < 10) throw Error("best_orientation_init: need at least 10 scan points");
  const std::vector<Vec3> pts = cap_points(scan, 400);
  YawPose best = pose0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    YawPose cand = pose0;
    cand.yaw = k == 0 ? pose0.yaw : wrap_angle(pose0.yaw + k * kPi / 2.0);
    const double e = orientation_residual(mi, pts, cand, gate);
    if (e < best_err) {
      best_err = e;
      best = cand;
    }
  }
  return best;
}

YawPose best_orientation_init(const CadModel& model, const PointCloud& scan, const YawPose& pose0, double gate) {
  const ModelIndex mi(model);
  return best_orientation_init(mi, scan, pose0, gate);
}

double existence_probability(double e_icp, double e_min, double e_max) {
  if (!(e_min < e_max)) throw Error("existence_probability: e_min must be below e_max");
  const double p = 1.0 - 0.5 * (e_icp - e_min) / (e_max - e_min);
  return std::clamp(p, 0.5, 1.0);
}

PointCloud crop_to_box(const PointCloud& cloud, const OrientedBox3& box, double scale) {
  OrientedBox3 grown = box;
  grown.size *= scale;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (grown.contains(cloud.points[i])) keep.push_back(i);
  }
  return cloud.subset(keep);
}

std::optional<VerifiedDetection> verify(const Detection& det, const PointCloud& cloud, const CadDatabase& models,
                                        const IcpConfig& cfg) {
  const ModelIndex& mi = models.get(det.label);
  const PointCloud crop = crop_to_box(cloud, det.box, cfg.crop_scale);
  if (crop.size() < 10) return std::nullopt;
  const YawPose init{det.box.center.x(), det.box.center.y(), det.box.center.z() - 0.5 * det.box.size.z(), det.box.yaw};
  const auto best = icp_candidates(mi, crop, init, cfg);
  if (!best) return std::nullopt;
  const IcpResult& fit = *best;
  if (fit.residual > cfg.e_max || fit.inlier_ratio < cfg.min_inlier_ratio) return std::nullopt;

  VerifiedDetection v;
  v.pose = fit.pose;
  const Vec3 size = mi.model.nominal_size;
  v.box = {Vec3(fit.pose.x, fit.pose.y, fit.pose.z + 0.5 * size.z()), size, fit.pose.yaw};
  v.e_icp = fit.residual;
  v.p_exist = existence_probability(fit.residual, cfg.e_min, cfg.e_max);
  v.iterations = fit.iterations;
  v.detection = det;
  return v;
}

}  // namespace oanav
