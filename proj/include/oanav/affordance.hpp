#pragma once

#include "oanav/geometry.hpp"

#include <cstdint>
#include <string>

namespace oanav {

enum class ObjectClass : int { Chair = 0, Table = 1 };
inline constexpr int kNumClasses = 2;

std::string to_string(ObjectClass c);
ObjectClass class_from_string(const std::string& s);

/// Orientation period: chairs are asymmetric, tables 2-fold symmetric.
inline double yaw_period(ObjectClass c) { return c == ObjectClass::Table ? kPi : 2.0 * kPi; }

/// Soft cost field describing where an object is likely to be moved or
/// occupied by people. Coordinates are in the object frame (+x forward).
///
/// Chairs: ellipse with `semi_major` along +x and `semi_minor` along y.
/// Tables: footprint rectangle plus `side_pad` on the +-y sides only.
/// Costs fall off linearly from `peak_cost` to zero at the shape boundary.
struct AffordanceSpec {
  ObjectClass cls = ObjectClass::Chair;
  double semi_major = 1.0;
  double semi_minor = 0.5;
  double half_len = 0.6;
  double half_wid = 0.4;
  double side_pad = 0.6;
  std::uint8_t peak_cost = 200;

  static AffordanceSpec chair_default();
  static AffordanceSpec table_default();

  /// Same shape grown outward by `margin` metres.
  AffordanceSpec padded(double margin) const;

  /// Cost in [0, peak_cost] at a point given in the object frame.
  double cost_local(const Vec2& p) const;
  bool contains_local(const Vec2& p) const { return cost_local(p) > 0.0; }
  /// Radius of a circle that bounds the shape.
  double bounding_radius() const;
};

/// Object-frame coordinates of a world point, for an object at `pose`.
Vec2 to_object_frame(const YawPose& pose, const Vec2& world);

/// Pair of per-class specs used together by the costmap and risk accounting.
struct AffordanceSet {
  AffordanceSpec chair = AffordanceSpec::chair_default();
  AffordanceSpec table = AffordanceSpec::table_default();

  const AffordanceSpec& get(ObjectClass c) const { return c == ObjectClass::Chair ? chair : table; }
  AffordanceSet padded(double margin) const { return {chair.padded(margin), table.padded(margin)}; }
};

}  // namespace oanav
