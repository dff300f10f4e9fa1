#pragma once

#include <cmath>
#include <stdexcept>

#include "thicket/types.hpp"

namespace thicket::control {

struct ControlInput {
  double v = 0.0;
  double omega = 0.0;
};

/// Range and body-frame bearing to a feature point, as a LIDAR or
/// binocular sensor would report them.
struct BearingMeasurement {
  double rho = 0.0;
  double phi = 0.0;
};

/// Gains of the time-to-transit gate law: the image-coordinate margin
/// epsilon of the invariant set and the forward speed cap.
struct GateGains {
  double epsilon = 1e-3;
  double v_cap = 1.0;
};

inline void validate(const GateGains& g) {
  if (!(g.epsilon > 0.0) || !(g.v_cap > 0.0)) {
    throw std::invalid_argument("gate gains: epsilon and v_cap must be > 0");
  }
}

/// Gains of the distance/bearing circle law: forward gain lambda and the
/// standoff circle radius. The convergence guarantee needs
/// 0 < lambda < d_standoff.
struct CircleGains {
  double lambda = 0.5;
  double d_standoff = 1.0;
};

inline void validate(const CircleGains& g) {
  if (!(g.lambda > 0.0) || !(g.lambda < g.d_standoff)) {
    throw std::invalid_argument(
        "circle gains: need 0 < lambda < d_standoff");
  }
}

enum class Orientation { ccw, cw };

/// Exact unicycle update over one step: an arc of radius v/omega, or a
/// chord along the midpoint heading when |omega|*dt is below switchover
/// (the two agree to second order there). Heading is renormalized.
inline VehicleState step_kinematics(const VehicleState& s,
                                    const ControlInput& u, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("step_kinematics: dt must be positive");
  }
  VehicleState next = s;
  const double dth = u.omega * dt;
  if (std::abs(dth) < 1e-8) {
    const double mid = s.theta + 0.5 * dth;
    next.x += u.v * dt * std::cos(mid);
    next.y += u.v * dt * std::sin(mid);
  } else {
    const double radius = u.v / u.omega;
    next.x += radius * (std::sin(s.theta + dth) - std::sin(s.theta));
    next.y -= radius * (std::cos(s.theta + dth) - std::cos(s.theta));
  }
  next.theta = normalize_angle(s.theta + dth);
  return next;
}

/// Simulated range/bearing sensor. phi is measured from the body x-axis,
/// in (-pi, pi].
inline BearingMeasurement measure_range_bearing(const VehicleState& s,
                                                const FeaturePoint& goal) {
  const double dx = goal.x - s.x;
  const double dy = goal.y - s.y;
  const double rho = std::hypot(dx, dy);
  if (rho == 0.0) {
    throw std::invalid_argument(
        "measure_range_bearing: goal coincides with the vehicle");
  }
  return BearingMeasurement{rho,
                            normalize_angle(std::atan2(dy, dx) - s.theta)};
}

/// Distance/bearing feedback: v = lambda (rho - d), omega = rho sin(phi)
/// -/+ d. The ccw form has its fixed point at (rho, phi) = (d, pi/2) and
/// settles tangent to the standoff circle counterclockwise; cw is the
/// mirror image.
inline ControlInput bearing_law(const BearingMeasurement& m,
                                const CircleGains& g,
                                Orientation orientation = Orientation::ccw) {
  validate(g);
  const double v = g.lambda * (m.rho - g.d_standoff);
  const double turn = m.rho * std::sin(m.phi);
  const double omega = orientation == Orientation::ccw
                           ? turn - g.d_standoff
                           : turn + g.d_standoff;
  return ControlInput{v, omega};
}

/// A world-frame ray anchored at the vehicle position.
struct Ray {
  double x = 0.0;
  double y = 0.0;
  double angle = 0.0;
};

struct SingularBranches {
  Ray stable;
  Ray unstable;
};

/// The two headings at the current position on which rho sin(phi) = d,
/// i.e. the turn command of the ccw bearing law vanishes. Both rays run
/// tangent to the standoff circle; the stable branch closes on the
/// tangent point, the unstable branch recedes and is the set of initial
/// headings from which the law never reaches tangency. Diagnostic only.
inline SingularBranches singular_variety(const VehicleState& s,
                                         const FeaturePoint& goal,
                                         double d_standoff) {
  const double dx = goal.x - s.x;
  const double dy = goal.y - s.y;
  const double rho = std::hypot(dx, dy);
  if (!(rho > d_standoff)) {
    throw std::domain_error(
        "singular_variety: tangents undefined at rho <= d");
  }
  const double psi = std::atan2(dy, dx);
  const double half = std::asin(d_standoff / rho);
  SingularBranches b;
  b.stable = Ray{s.x, s.y, normalize_angle(psi - half)};
  b.unstable = Ray{s.x, s.y, normalize_angle(psi - kPi + half)};
  return b;
}

/// Time-to-transit gate law: v = min(v_cap, tau_l + tau_r); omega
/// equalizes the two transit times except on the boundary of the
/// invariant set, where the turn is held at zero.
///
/// The boundary condition is the closed reading d_r <= eps (resp.
/// d_l >= -eps): the exact equality of the continuous-time statement has
/// measure zero under discrete sampling, and holding omega = 0 on the
/// closed set gives the sliding behavior the law relies on. When both
/// hold at once the turn stays zero; the simulator records that event.
inline ControlInput transit_law(double d_left, double d_right,
                                double tau_left, double tau_right,
                                const GateGains& g) {
  validate(g);
  const double v = std::min(g.v_cap, tau_left + tau_right);
  const bool hold = d_right <= g.epsilon || d_left >= -g.epsilon;
  return ControlInput{v, hold ? 0.0 : tau_right - tau_left};
}

}  // namespace thicket::control
