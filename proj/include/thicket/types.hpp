#pragma once

#include <cmath>
#include <numbers>
#include <string>

namespace thicket {

inline constexpr double kPi = std::numbers::pi;

/// Normalize an angle to (-pi, pi].
inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) {
    a += 2.0 * kPi;
  } else if (a > kPi) {
    a -= 2.0 * kPi;
  }
  return a;
}

/// Interval [lo, hi] on the real line.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  bool contains(double s) const { return s >= lo && s <= hi; }
  bool empty() const { return !(lo < hi); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Planar pose (x, y, theta) of the vehicle/sensor body frame.
/// theta is the world-frame heading, kept in (-pi, pi].
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// A world-frame point tracked by the image sensor (a slat edge, a goal
/// marker, ...).
struct FeaturePoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

}  // namespace thicket
