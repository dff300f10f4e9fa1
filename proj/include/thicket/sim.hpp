#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "thicket/camera.hpp"
#include "thicket/control.hpp"
#include "thicket/field.hpp"
#include "thicket/types.hpp"

namespace thicket::sim {

/// Where the controller's transit times come from.
///
/// derotated_track differences the image coordinate against a virtual
/// sample taken one step back along the current heading (commanded
/// ego-motion is known to the vehicle). That recovers the frozen-heading
/// derivative the transit time is defined by; differencing raw samples
/// from a turning platform folds the rotation rate into the image
/// velocity and destabilizes the loop, and in this camera model the
/// rotational component cannot be removed from image data alone.
///
/// kinematic evaluates the transit time from ground-truth pose and
/// speed; useful as an ideal-sensor baseline.
enum class TauSensor { derotated_track, kinematic };

struct TrajectorySample {
  double t = 0.0;
  VehicleState state;
  control::ControlInput u;
  bool has_gate = false;
  double d_left = std::numeric_limits<double>::quiet_NaN();
  double d_right = std::numeric_limits<double>::quiet_NaN();
  double tau_left = std::numeric_limits<double>::quiet_NaN();
  double tau_right = std::numeric_limits<double>::quiet_NaN();
};

struct Event {
  double t = 0.0;
  std::string kind;
  std::map<std::string, double> data;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<Event> events;

  const Event* find_event(const std::string& kind) const {
    for (const Event& e : events) {
      if (e.kind == kind) return &e;
    }
    return nullptr;
  }
};

struct NoGapInCone : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct GateMeasurement {
  double d_left = 0.0;
  double d_right = 0.0;
  double tau_left = 0.0;
  double tau_right = 0.0;
};

// Sense both gate features from the current pose. v_prev is the speed
// flown over the previous step; NaN requests the kinematic bootstrap
// (first step, no motion to difference yet).
inline GateMeasurement measure_gate(const VehicleState& pose,
                                    const FeaturePoint& left,
                                    const FeaturePoint& right, double f,
                                    double v_prev, double dt,
                                    TauSensor sensor, double v_bootstrap) {
  GateMeasurement m;
  m.d_left = camera::image_coord(pose, left.x, left.y, f);
  m.d_right = camera::image_coord(pose, right.x, right.y, f);

  const bool bootstrap = std::isnan(v_prev);
  if (sensor == TauSensor::kinematic || bootstrap) {
    const double v = bootstrap ? v_bootstrap : std::max(v_prev, 1e-9);
    m.tau_left = camera::tau_transit(pose, left.x, left.y, v, f);
    m.tau_right = camera::tau_transit(pose, right.x, right.y, v, f);
    return m;
  }

  VehicleState back = pose;
  back.x -= v_prev * dt * std::cos(pose.theta);
  back.y -= v_prev * dt * std::sin(pose.theta);
  const auto diff_tau = [&](const FeaturePoint& feat, double d_now) {
    const double d_back = camera::image_coord(back, feat.x, feat.y, f);
    const double deriv = (d_now - d_back) / dt;
    if (std::abs(deriv) < 1e-12) {
      // Vehicle essentially stopped: no usable flow, fall back to the
      // kinematic value at a crawl speed.
      return camera::tau_transit(pose, feat.x, feat.y,
                                 std::max(v_prev, 1e-9), f);
    }
    return d_now / deriv;
  };
  m.tau_left = diff_tau(left, m.d_left);
  m.tau_right = diff_tau(right, m.d_right);
  return m;
}

// Along-heading distance from the pose to a world point.
inline double along_distance(const VehicleState& pose, double xf, double yf) {
  return std::cos(pose.theta) * (xf - pose.x) +
         std::sin(pose.theta) * (yf - pose.y);
}

inline VehicleState lerp_pose(const VehicleState& a, const VehicleState& b,
                              double s) {
  VehicleState out;
  out.x = a.x + s * (b.x - a.x);
  out.y = a.y + s * (b.y - a.y);
  out.theta = normalize_angle(a.theta + s * normalize_angle(b.theta - a.theta));
  return out;
}

// Intersection of the directed segment (x1,y1)->(x2,y2) with a slat of
// the row, if any. Returns the segment parameter s in [0, 1] and the
// abscissa of the hit. Slats are closed: grazing an endpoint counts.
// Outside the sampled extent the field is not modeled; no hit there.
inline std::optional<std::pair<double, double>> segment_row_hit(
    double x1, double y1, double x2, double y2,
    const field::ObstacleRow& row) {
  const double lo = std::min(y1, y2);
  const double hi = std::max(y1, y2);
  if (row.ordinate < lo || row.ordinate > hi) {
    return std::nullopt;
  }
  if (y1 == y2) {
    const double xlo = std::min(x1, x2);
    const double xhi = std::max(x1, x2);
    for (const Interval& slat : row.slats) {
      if (slat.lo <= xhi && slat.hi >= xlo) {
        return std::make_pair(0.0, std::max(xlo, slat.lo));
      }
    }
    return std::nullopt;
  }
  const double s = (row.ordinate - y1) / (y2 - y1);
  const double x = x1 + s * (x2 - x1);
  if (!row.extent.contains(x)) {
    return std::nullopt;
  }
  if (field::occupancy(row, x)) {
    return std::make_pair(s, x);
  }
  return std::nullopt;
}

}  // namespace detail

/// Scenario for a single gate passage: two features on one row, a start
/// pose below them, gate gains, and the integration setup.
struct GateScenario {
  FeaturePoint left{"left", -1.0, 10.0};
  FeaturePoint right{"right", 1.0, 10.0};
  VehicleState start{0.0, 0.0, kPi / 2.0};
  control::GateGains gains;
  double f = 1.0;
  double dt = 1e-3;
  double t_max = 60.0;
  TauSensor sensor = TauSensor::derotated_track;
};

inline void validate(const GateScenario& s) {
  control::validate(s.gains);
  if (!(s.left.x < s.right.x)) {
    throw std::invalid_argument("gate scenario: need left.x < right.x");
  }
  if (s.left.y != s.right.y) {
    throw std::invalid_argument("gate scenario: features must share a row");
  }
  if (!(s.start.y < s.left.y)) {
    throw std::invalid_argument("gate scenario: start must be below the gate");
  }
  if (!(s.dt > 0.0) || !(s.t_max > 0.0)) {
    throw std::invalid_argument("gate scenario: bad dt or t_max");
  }
}

/// Fly the time-to-transit law through one gate. Terminates when the
/// gate midpoint transits the image plane (event "gate_crossed", with
/// the interpolated crossing abscissa and heading), or at t_max (event
/// "timeout"). Sensing happens at each sample time; the resulting
/// command is applied over the following step.
inline Trajectory run_gate(const GateScenario& sc) {
  validate(sc);
  Trajectory traj;
  const double x_mid = 0.5 * (sc.left.x + sc.right.x);
  const double y_gate = sc.left.y;

  VehicleState pose = sc.start;
  double v_prev = std::numeric_limits<double>::quiet_NaN();
  bool holding_both = false;

  const std::size_t max_steps =
      static_cast<std::size_t>(std::ceil(sc.t_max / sc.dt));
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    if (k > 0) {
      const VehicleState& prev = traj.samples.back().state;
      const double a_prev = detail::along_distance(prev, x_mid, y_gate);
      const double a_cur = detail::along_distance(pose, x_mid, y_gate);
      if (a_prev > sc.f && a_cur <= sc.f) {
        const double s = (a_prev - sc.f) / (a_prev - a_cur);
        const VehicleState cross = detail::lerp_pose(prev, pose, s);
        const double t_cross = t - sc.dt + s * sc.dt;
        TrajectorySample terminal;
        terminal.t = t_cross;
        terminal.state = cross;
        traj.samples.push_back(terminal);
        Event e;
        e.t = t_cross;
        e.kind = "gate_crossed";
        e.data = {{"x", cross.x}, {"y", cross.y}, {"theta", cross.theta}};
        traj.events.push_back(e);
        break;
      }
    }

    const auto m = detail::measure_gate(pose, sc.left, sc.right, sc.f, v_prev,
                                        sc.dt, sc.sensor, sc.gains.v_cap);
    const control::ControlInput u = control::transit_law(
        m.d_left, m.d_right, m.tau_left, m.tau_right, sc.gains);

    TrajectorySample sample;
    sample.t = t;
    sample.state = pose;
    sample.u = u;
    sample.has_gate = true;
    sample.d_left = m.d_left;
    sample.d_right = m.d_right;
    sample.tau_left = m.tau_left;
    sample.tau_right = m.tau_right;
    traj.samples.push_back(sample);

    const bool both =
        m.d_right <= sc.gains.epsilon && m.d_left >= -sc.gains.epsilon;
    if (both && !holding_both) {
      traj.events.push_back(Event{t, "boundary_hold_both", {}});
    }
    holding_both = both;

    if (k >= max_steps) {
      traj.events.push_back(Event{t, "timeout", {}});
      break;
    }
    pose = control::step_kinematics(pose, u, sc.dt);
    v_prev = u.v;
  }
  return traj;
}

/// Scenario for the distance/bearing circle-approach law.
struct CircleScenario {
  FeaturePoint goal{"goal", 0.0, 0.0};
  control::CircleGains gains;
  VehicleState start{5.0, 0.0, kPi / 2.0};
  control::Orientation orientation = control::Orientation::ccw;
  double dt = 1e-3;
  // The endgame is an in-place rotation with phi settling like 1/t, so
  // tight tolerances need long horizons.
  double t_max = 10000.0;
  // Early-stop tolerances on |rho - d| and |phi -/+ pi/2|.
  double settle_pos_tol = 8e-4;
  double settle_ang_tol = 8e-4;
};

/// Close the loop on the bearing law until (rho, phi) settles at the
/// tangency point (event "converged") or t_max elapses ("timeout").
inline Trajectory run_circle(const CircleScenario& sc) {
  control::validate(sc.gains);
  if (!(sc.dt > 0.0) || !(sc.t_max > 0.0)) {
    throw std::invalid_argument("circle scenario: bad dt or t_max");
  }
  Trajectory traj;
  VehicleState pose = sc.start;
  const double phi_target =
      sc.orientation == control::Orientation::ccw ? kPi / 2.0 : -kPi / 2.0;
  const std::size_t max_steps =
      static_cast<std::size_t>(std::ceil(sc.t_max / sc.dt)) + 1;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    const auto m = control::measure_range_bearing(pose, sc.goal);
    const control::ControlInput u =
        control::bearing_law(m, sc.gains, sc.orientation);

    TrajectorySample sample;
    sample.t = t;
    sample.state = pose;
    sample.u = u;
    traj.samples.push_back(sample);

    if (std::abs(m.rho - sc.gains.d_standoff) < sc.settle_pos_tol &&
        std::abs(normalize_angle(m.phi - phi_target)) < sc.settle_ang_tol) {
      traj.events.push_back(
          Event{t, "converged", {{"rho", m.rho}, {"phi", m.phi}}});
      break;
    }
    if (k >= max_steps) {
      traj.events.push_back(Event{t, "timeout", {}});
      break;
    }
    pose = control::step_kinematics(pose, u, sc.dt);
  }
  return traj;
}

/// Pick the gate for the next row: the slat-edge pair bounding the gap
/// whose midpoint direction is angularly closest to the current heading.
/// Near-ties (within 1e-9 rad) go to the wider gap, then to the leftmost.
/// Only gaps between two slats qualify -- their edges are the image
/// discontinuities the sensor can actually track.
inline std::pair<FeaturePoint, FeaturePoint> select_gate_features(
    const VehicleState& state, const field::ObstacleRow& row,
    double view_half_angle = kPi / 2.0) {
  if (!(row.ordinate > state.y)) {
    throw std::invalid_argument(
        "select_gate_features: row must be ahead of the vehicle");
  }
  const double dy = row.ordinate - state.y;
  bool found = false;
  double best_ang = 0.0;
  Interval best_gap;
  for (std::size_t i = 0; i + 1 < row.slats.size(); ++i) {
    const Interval gap{row.slats[i].hi, row.slats[i + 1].lo};
    const double dir = std::atan2(dy, gap.midpoint() - state.x);
    const double ang = std::abs(normalize_angle(dir - state.theta));
    if (ang > view_half_angle) {
      continue;
    }
    bool better = false;
    if (!found || ang < best_ang - 1e-9) {
      better = true;
    } else if (ang < best_ang + 1e-9) {
      if (gap.length() > best_gap.length() + 1e-12) {
        better = true;
      } else if (std::abs(gap.length() - best_gap.length()) <= 1e-12 &&
                 gap.lo < best_gap.lo) {
        better = true;
      }
    }
    if (better) {
      found = true;
      best_ang = ang;
      best_gap = gap;
    }
  }
  if (!found) {
    throw NoGapInCone("select_gate_features: no gap in the view cone");
  }
  return {FeaturePoint{"left", best_gap.lo, row.ordinate},
          FeaturePoint{"right", best_gap.hi, row.ordinate}};
}

struct ClutterScenario {
  control::GateGains gains;
  VehicleState start{0.0, 0.0, kPi / 2.0};
  double f = 1.0;
  double dt = 1e-2;
  double t_max = 400.0;
  double view_half_angle = kPi / 2.0;
  double exit_margin = 1.0;
  TauSensor sensor = TauSensor::derotated_track;
  // Acquisition turn toward a freshly selected gap: proportional gain
  // on the midpoint bearing error and the turn-rate saturation.
  double align_gain = 4.0;
  double align_omega_max = 2.0;
};

/// Fly through a whole field, re-gating on the best gap of each row in
/// turn. Rows without slats are crossed in open-row cruise. Terminates
/// with one of the events "field_exit" (success), "collision",
/// "no_gap_in_cone", or "timeout".
inline Trajectory run_clutter_flight(const field::ObstacleField& f,
                                     const ClutterScenario& sc) {
  control::validate(sc.gains);
  if (f.rows.empty()) {
    throw std::invalid_argument("run_clutter_flight: field has no rows");
  }
  if (!(sc.start.y < f.rows.front().ordinate)) {
    throw std::invalid_argument(
        "run_clutter_flight: start must be below the first row");
  }

  Trajectory traj;
  VehicleState pose = sc.start;
  double v_prev = std::numeric_limits<double>::quiet_NaN();
  std::size_t row_idx = 0;
  bool gate_active = false;
  // The transit law only acts once the heading ray passes between the
  // gate features (its invariant set); until then an acquisition turn
  // steers toward the gap midpoint. Latched per gate.
  bool engaged = false;
  std::optional<std::pair<FeaturePoint, FeaturePoint>> gate;

  const auto push_terminal = [&](double t) {
    TrajectorySample terminal;
    terminal.t = t;
    terminal.state = pose;
    traj.samples.push_back(terminal);
  };

  // Sets up the gate (or open-row cruise) for the current row; records
  // the failure event and returns false when no gap is in view.
  const auto acquire = [&](double t) -> bool {
    if (row_idx >= f.rows.size()) {
      gate_active = false;
      gate.reset();
      return true;
    }
    const field::ObstacleRow& row = f.rows[row_idx];
    if (row.slats.empty()) {
      gate_active = false;
      gate.reset();
      return true;
    }
    try {
      gate = select_gate_features(pose, row, sc.view_half_angle);
      gate_active = true;
      engaged = false;
      return true;
    } catch (const NoGapInCone&) {
      traj.events.push_back(Event{
          t, "no_gap_in_cone", {{"row", static_cast<double>(row_idx)}}});
      return false;
    }
  };

  if (!acquire(0.0)) {
    push_terminal(0.0);
    return traj;
  }

  const std::size_t max_steps =
      static_cast<std::size_t>(std::ceil(sc.t_max / sc.dt));
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * sc.dt;

    control::ControlInput u{sc.gains.v_cap, 0.0};
    TrajectorySample sample;
    sample.t = t;
    sample.state = pose;
    if (gate_active) {
      const auto m =
          detail::measure_gate(pose, gate->first, gate->second, sc.f, v_prev,
                               sc.dt, sc.sensor, sc.gains.v_cap);
      // Hand over to the transit law once inside its invariant set AND
      // inside the strip between the features: a case-1 start, whose
      // crossing stays strictly inside the gap. Case-2 engagements
      // would graze the near slat edge, which the closed-slat world
      // punishes.
      engaged = engaged || (m.d_left <= -sc.gains.epsilon &&
                            m.d_right >= sc.gains.epsilon &&
                            pose.x > gate->first.x &&
                            pose.x < gate->second.x);
      if (engaged) {
        u = control::transit_law(m.d_left, m.d_right, m.tau_left, m.tau_right,
                                 sc.gains);
      } else {
        const double dir = std::atan2(gate->first.y - pose.y,
                                      0.5 * (gate->first.x + gate->second.x) -
                                          pose.x);
        const double err = normalize_angle(dir - pose.theta);
        u.omega = std::clamp(sc.align_gain * err, -sc.align_omega_max,
                             sc.align_omega_max);
      }
      sample.has_gate = true;
      sample.d_left = m.d_left;
      sample.d_right = m.d_right;
      sample.tau_left = m.tau_left;
      sample.tau_right = m.tau_right;
    }
    sample.u = u;
    traj.samples.push_back(sample);

    if (k >= max_steps) {
      traj.events.push_back(Event{t, "timeout", {}});
      break;
    }

    const VehicleState next = control::step_kinematics(pose, u, sc.dt);

    // Collision against every row line the step straddles.
    std::optional<Event> hit_event;
    for (const field::ObstacleRow& row : f.rows) {
      if (const auto hit =
              detail::segment_row_hit(pose.x, pose.y, next.x, next.y, row)) {
        Event e;
        e.t = t + hit->first * sc.dt;
        e.kind = "collision";
        e.data = {{"x", hit->second}, {"ordinate", row.ordinate}};
        if (!hit_event || e.t < hit_event->t) {
          hit_event = e;
        }
      }
    }
    if (hit_event) {
      pose = detail::lerp_pose(pose, next, (hit_event->t - t) / sc.dt);
      push_terminal(hit_event->t);
      traj.events.push_back(*hit_event);
      break;
    }

    pose = next;
    v_prev = u.v;
    const double t_next = t + sc.dt;

    if (row_idx >= f.rows.size()) {
      if (pose.y > f.rows.back().ordinate + sc.exit_margin) {
        push_terminal(t_next);
        traj.events.push_back(Event{t_next, "field_exit", {}});
        break;
      }
      continue;
    }

    const field::ObstacleRow& row = f.rows[row_idx];
    if (gate_active) {
      const double x_mid = 0.5 * (gate->first.x + gate->second.x);
      // Image-plane transit of the gap midpoint, or (for badly tilted
      // headings, where that projection fires far from the row) plain
      // proximity to the row line. The vehicle then coasts straight
      // across the row before re-gating; turning on top of the slats
      // is what drags a safe crossing onto an edge.
      const bool passed =
          detail::along_distance(pose, x_mid, row.ordinate) <= sc.f ||
          pose.y >= row.ordinate - sc.f;
      if (passed) {
        traj.events.push_back(Event{
            t_next, "gate_passed", {{"row", static_cast<double>(row_idx)}}});
        gate_active = false;
        gate.reset();
      }
    }
    if (!gate_active && pose.y > row.ordinate) {
      traj.events.push_back(Event{
          t_next, "row_crossed", {{"row", static_cast<double>(row_idx)}}});
      ++row_idx;
      if (!acquire(t_next)) {
        push_terminal(t_next);
        break;
      }
    }
  }
  return traj;
}

/// First intersection of a recorded trajectory with the field, if any.
/// Checks every consecutive state pair against every row line the pair
/// straddles; grazing a slat endpoint counts as a hit.
inline std::optional<Event> detect_collision(const Trajectory& traj,
                                             const field::ObstacleField& f) {
  for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
    const auto& a = traj.samples[i];
    const auto& b = traj.samples[i + 1];
    // Rows in travel order within this step.
    std::optional<std::pair<double, double>> first_hit;
    double first_ordinate = 0.0;
    for (const field::ObstacleRow& row : f.rows) {
      if (const auto hit = detail::segment_row_hit(a.state.x, a.state.y,
                                                   b.state.x, b.state.y,
                                                   row)) {
        if (!first_hit || hit->first < first_hit->first) {
          first_hit = hit;
          first_ordinate = row.ordinate;
        }
      }
    }
    if (first_hit) {
      Event e;
      e.t = a.t + first_hit->first * (b.t - a.t);
      e.kind = "collision";
      e.data = {{"x", first_hit->second}, {"ordinate", first_ordinate}};
      return e;
    }
  }
  return std::nullopt;
}

}  // namespace thicket::sim
