#include "oanav/track.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace oanav {

void kf_predict(StateVec& x, StateCov& P, double dt, const StateCov& Q) {
  if (!(dt > 0.0)) throw Error("kf_predict: dt must be positive");
  StateCov F = StateCov::Identity();
  F(0, 7) = dt;
  F(1, 8) = dt;
  F(2, 9) = dt;
  x = F * x;
  P = F * P * F.transpose() + Q * dt;
  P = 0.5 * (P + P.transpose());
}

void kf_update(StateVec& x, StateCov& P, const MeasVec& z, const MeasCov& R, double yaw_period) {
  Eigen::Matrix<double, 7, 10> H = Eigen::Matrix<double, 7, 10>::Zero();
  H.leftCols<7>().setIdentity();
  MeasVec y = z - H * x;
  // Innovation wrapped to [-period/2, period/2).
  const double half = 0.5 * yaw_period;
  y[3] = std::fmod(y[3] + half, yaw_period);
  if (y[3] < 0.0) y[3] += yaw_period;
  y[3] -= half;
  const MeasCov S = H * P * H.transpose() + R;
  const Eigen::Matrix<double, 10, 7> K = P * H.transpose() * S.inverse();
  x += K * y;
  x[3] = wrap_angle(x[3]);
  const StateCov IKH = StateCov::Identity() - K * H;
  P = IKH * P * IKH.transpose() + K * R * K.transpose();
  P = 0.5 * (P + P.transpose());
}

StateCov TrackerConfig::process_noise() const {
  StateVec d;
  d << q_pos, q_pos, q_pos, q_yaw, q_scale, q_scale, q_scale, q_vel, q_vel, q_vel;
  return d.asDiagonal();
}

MeasCov TrackerConfig::measurement_noise() const {
  MeasVec d;
  d << r_pos, r_pos, r_pos, r_yaw, r_scale, r_scale, r_scale;
  return d.asDiagonal();
}

OrientedBox3 ObjectTrack::box() const {
  return {x.head<3>(), x.segment<3>(4).cwiseMax(Vec3::Constant(1e-3)), x[3]};
}

YawPose ObjectTrack::pose() const { return {x[0], x[1], x[2] - 0.5 * x[6], x[3]}; }

ClassScores ObjectTrack::class_mean() const {
  ClassScores m{};
  if (k == 0) return m;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = class_sum[i] / k;
  return m;
}

void ObjectTrack::add_class_scores(const ClassScores& s) {
  for (std::size_t i = 0; i < s.size(); ++i) class_sum[i] += s[i];
  ++k;
  const ClassScores m = class_mean();
  const auto best = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
  label = static_cast<ObjectClass>(best);
  confidence = m[best];
}

void ObjectTrack::add_existence(double p) {
  p_exist_sum += p;
  ++p_exist_count;
  p_exist = p_exist_sum / p_exist_count;
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0) return {};
  if (cols == 0) return std::vector<int>(rows, -1);
  if (rows > cols) {
    const std::vector<int> t = hungarian(cost.transpose());
    std::vector<int> out(rows, -1);
    for (int c = 0; c < cols; ++c) {
      if (t[c] >= 0) out[t[c]] = c;
    }
    return out;
  }
  // Potentials method, rows <= cols, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (int j = 1; j <= cols; ++j) {
    if (p[j] > 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

Association associate(std::span<const OrientedBox3> tracks, std::span<const OrientedBox3> dets, double giou_min) {
  Association a;
  const int nt = static_cast<int>(tracks.size());
  const int nd = static_cast<int>(dets.size());
  Eigen::MatrixXd giou(nt, nd);
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < nd; ++j) giou(i, j) = box_giou3d(tracks[i], dets[j]);
  }
  const std::vector<int> assign = hungarian(-giou);
  std::vector<char> det_used(nd, 0);
  for (int i = 0; i < nt; ++i) {
    const int j = assign.empty() ? -1 : assign[i];
    if (j >= 0 && giou(i, j) >= giou_min) {
      a.matches.emplace_back(i, j);
      det_used[j] = 1;
    } else {
      a.unmatched_tracks.push_back(i);
    }
  }
  for (int j = 0; j < nd; ++j) {
    if (!det_used[j]) a.unmatched_dets.push_back(j);
  }
  return a;
}

bool occlusion_check(const OrientedBox3& target, std::span<const OrientedBox3> others, const Vec3& origin,
                     int n_rays, double fraction) {
  if (others.empty()) return false;
  std::vector<Vec3> pts{target.center};
  for (const auto& c : target.corners()) pts.push_back(target.center + 0.9 * (c - target.center));
  pts.resize(std::min<std::size_t>(pts.size(), static_cast<std::size_t>(std::max(1, n_rays))));
  const Aabb tbox = target.aabb();
  std::vector<Aabb> boxes;
  for (const auto& o : others) boxes.push_back(o.aabb());

  int blocked = 0;
  for (const auto& pt : pts) {
    const Vec3 d = pt - origin;
    const double len = d.norm();
    if (len < 1e-9) continue;
    const Vec3 dir = d / len;
    const double reach = ray_aabb_hit(origin, dir, tbox).value_or(len);
    for (const auto& b : boxes) {
      const auto t = ray_aabb_hit(origin, dir, b);
      if (t && *t < reach) {
        ++blocked;
        break;
      }
    }
  }
  return blocked >= fraction * static_cast<double>(pts.size()) - 1e-9;
}

WorldDetection to_world(const VerifiedDetection& v, const Pose3& sensor_pose) {
  const YawPose w = YawPose::from_pose3(sensor_pose * v.pose.to_pose3());
  const Vec3 size = v.box.size;
  return {{Vec3(w.x, w.y, w.z + 0.5 * size.z()), size, wrap_angle(w.yaw)}, v};
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(cfg) {}

std::vector<int> Tracker::sorted_ids() const {
  std::vector<int> ids;
  ids.reserve(tracks_.size());
  for (const auto& [id, t] : tracks_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<ObjectTrack> Tracker::snapshot() const {
  std::vector<ObjectTrack> out;
  for (const int id : sorted_ids()) out.push_back(tracks_.at(id));
  return out;
}

ObjectTrack Tracker::spawn(const WorldDetection& d, int frame) {
  ObjectTrack t;
  t.id = next_id_++;
  t.x.head<3>() = d.box.center;
  t.x[3] = d.box.yaw;
  t.x.segment<3>(4) = d.box.size;
  t.x.tail<3>().setZero();
  StateVec p0;
  p0 << cfg_.p0_pos, cfg_.p0_pos, cfg_.p0_pos, cfg_.p0_yaw, cfg_.p0_scale, cfg_.p0_scale, cfg_.p0_scale, cfg_.p0_vel,
      cfg_.p0_vel, cfg_.p0_vel;
  t.P = p0.asDiagonal();
  t.cad = d.source.detection.label;
  t.birth_frame = frame;
  t.add_class_scores(d.source.detection.class_scores);
  t.add_existence(d.source.p_exist);
  t.updates = 1;
  return t;
}

void Tracker::update(ObjectTrack& t, const WorldDetection& d) {
  MeasVec z;
  z << d.box.center, d.box.yaw, d.box.size;
  kf_update(t.x, t.P, z, cfg_.measurement_noise(), yaw_period(t.label));
  t.add_class_scores(d.source.detection.class_scores);
  t.add_existence(d.source.p_exist);
  t.misses = 0;
  ++t.updates;
}

Tracker::Events Tracker::step(std::span<const VerifiedDetection> dets, const Pose3& sensor_pose, int frame,
                              double dt) {
  Events ev;
  const StateCov Q = cfg_.process_noise();
  const std::vector<int> ids = sorted_ids();
  for (const int id : ids) {
    auto& t = tracks_.at(id);
    kf_predict(t.x, t.P, dt, Q);
  }

  std::vector<WorldDetection> wdets;
  wdets.reserve(dets.size());
  for (const auto& v : dets) wdets.push_back(to_world(v, sensor_pose));

  const Vec3 origin = sensor_pose.translation;
  std::vector<int> cand;
  std::vector<OrientedBox3> cand_boxes;
  for (const int id : ids) {
    const auto& t = tracks_.at(id);
    if ((t.x.head<2>() - origin.head<2>()).norm() <= cfg_.valid_range) {
      cand.push_back(id);
      cand_boxes.push_back(t.box());
    }
  }
  std::vector<OrientedBox3> det_boxes;
  for (const auto& w : wdets) det_boxes.push_back(w.box);

  const Association a = associate(cand_boxes, det_boxes, cfg_.giou_min);
  for (const auto& [ti, di] : a.matches) {
    update(tracks_.at(cand[ti]), wdets[di]);
    ev.updated.push_back(cand[ti]);
  }

  // Occlusion is judged against the other tracks as they were before this frame's births.
  std::vector<int> to_remove;
  for (const int ti : a.unmatched_tracks) {
    auto& t = tracks_.at(cand[ti]);
    std::vector<OrientedBox3> others;
    for (const int id : ids) {
      if (id != t.id) others.push_back(tracks_.at(id).box());
    }
    if (occlusion_check(t.box(), others, origin, cfg_.occlusion_rays, cfg_.occlusion_fraction)) {
      ev.occluded.push_back(t.id);
      continue;
    }
    t.add_existence(0.0);
    ++t.misses;
  }

  for (const int di : a.unmatched_dets) {
    ObjectTrack t = spawn(wdets[di], frame);
    ev.born.push_back(t.id);
    tracks_.emplace(t.id, std::move(t));
  }

  for (const int id : sorted_ids()) {
    const auto& t = tracks_.at(id);
    if (t.misses > cfg_.max_misses || t.p_exist < cfg_.p_exist_min) to_remove.push_back(id);
  }
  for (const int id : to_remove) tracks_.erase(id);

  // Duplicate suppression: keep the better-supported track of a same-class overlapping pair.
  bool changed = true;
  while (changed) {
    changed = false;
    const std::vector<int> live = sorted_ids();
    for (std::size_t i = 0; i < live.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < live.size() && !changed; ++j) {
        const auto& a_t = tracks_.at(live[i]);
        const auto& b_t = tracks_.at(live[j]);
        if (a_t.label != b_t.label) continue;
        if (box_giou3d(a_t.box(), b_t.box()) <= cfg_.duplicate_giou) continue;
        const int drop = b_t.updates > a_t.updates ? a_t.id : b_t.id;
        tracks_.erase(drop);
        to_remove.push_back(drop);
        changed = true;
      }
    }
  }
  ev.removed = to_remove;
  return ev;
}

void write_track_header(std::ostream& out) { out << "frame,id,class,x,y,yaw,p_exist,s_c\n"; }

void write_tracks(std::ostream& out, int frame, std::span<const ObjectTrack> tracks) {
  char buf[192];
  for (const auto& t : tracks) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%.4f,%.4f,%.5f,%.4f,%.4f\n", frame, t.id, to_string(t.label).c_str(),
                  t.x[0], t.x[1], t.x[3], t.p_exist, t.confidence);
    out << buf;
  }
}

}  // namespace oanav
