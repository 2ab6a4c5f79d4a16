#include "oanav/affordance.hpp"

#include <algorithm>
#include <cmath>

namespace oanav {

std::string to_string(ObjectClass c) { return c == ObjectClass::Chair ? "chair" : "table"; }

ObjectClass class_from_string(const std::string& s) {
  if (s == "chair") return ObjectClass::Chair;
  if (s == "table") return ObjectClass::Table;
  throw Error("unknown object class: " + s);
}

AffordanceSpec AffordanceSpec::chair_default() {
  AffordanceSpec s;
  s.cls = ObjectClass::Chair;
  return s;
}

AffordanceSpec AffordanceSpec::table_default() {
  AffordanceSpec s;
  s.cls = ObjectClass::Table;
  return s;
}

AffordanceSpec AffordanceSpec::padded(double margin) const {
  AffordanceSpec s = *this;
  if (cls == ObjectClass::Chair) {
    s.semi_major += margin;
    s.semi_minor += margin;
  } else {
    s.half_len += margin;
    s.side_pad += margin;
  }
  return s;
}

double AffordanceSpec::cost_local(const Vec2& p) const {
  if (cls == ObjectClass::Chair) {
    const double u = p.x() / semi_major;
    const double v = p.y() / semi_minor;
    const double rho = std::sqrt(u * u + v * v);
    return peak_cost * std::max(0.0, 1.0 - rho);
  }
  if (std::abs(p.x()) > half_len) return 0.0;
  const double lateral = std::abs(p.y());
  if (lateral <= half_wid) return peak_cost;
  if (side_pad <= 0.0) return 0.0;
  return peak_cost * std::max(0.0, 1.0 - (lateral - half_wid) / side_pad);
}

double AffordanceSpec::bounding_radius() const {
  if (cls == ObjectClass::Chair) return std::max(semi_major, semi_minor);
  return std::hypot(half_len, half_wid + side_pad);
}

Vec2 to_object_frame(const YawPose& pose, const Vec2& world) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  const double dx = world.x() - pose.x;
  const double dy = world.y() - pose.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

}  // namespace oanav
