#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thicket/types.hpp"

namespace thicket::camera {

/// Head-on approach to a thin object: diameter d_obj, focal length f,
/// initial distance x0, constant closing speed v.
struct ApproachScenario {
  double d_obj = 1.0;
  double f = 1.0;
  double x0 = 10.0;
  double v = 1.0;
};

inline void validate(const ApproachScenario& s) {
  if (!(s.d_obj > 0.0) || !(s.f > 0.0) || !(s.x0 > 0.0) || !(s.v > 0.0)) {
    throw std::invalid_argument(
        "approach scenario: all parameters must be positive");
  }
}

/// Image-plane coordinate of one tracked feature at time t.
struct FeatureProjection {
  std::string id;
  double d_img = 0.0;
  double t = 0.0;
};

/// Inferred time-to-transit of one feature. Negative tau means the
/// transit line lies behind the sensor.
struct TauEstimate {
  std::string id;
  double tau = 0.0;
  double t = 0.0;
};

struct BehindCamera : std::domain_error {
  using std::domain_error::domain_error;
};
struct ProjectionSingularity : std::domain_error {
  using std::domain_error::domain_error;
};
struct UndefinedTau : std::domain_error {
  using std::domain_error::domain_error;
};

/// Image size of an object of diameter d_obj at distance x: f * d_obj / x.
inline double image_size(const ApproachScenario& s, double x) {
  validate(s);
  if (!(x > 0.0)) {
    throw BehindCamera("image_size: object at or behind the camera");
  }
  return s.f * s.d_obj / x;
}

/// Raw image coordinate of a world point seen from a pose; the struct
/// form below attaches the feature id and timestamp.
///
/// With body-frame offsets a (along heading) and b (lateral, positive
/// left), the coordinate is f*b / (1 - a). The denominator vanishes on
/// the line one focal length ahead of the sensor, where the feature
/// crosses the image plane. Features beyond that line and strictly right
/// of the heading ray project positive.
inline double image_coord(const VehicleState& s, double xf, double yf,
                          double f = 1.0) {
  const double dx = xf - s.x;
  const double dy = yf - s.y;
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  const double along = c * dx + sn * dy;
  const double lateral = -sn * dx + c * dy;
  const double den = 1.0 - along;
  if (std::abs(den) < 1e-12) {
    throw ProjectionSingularity("image_coord: feature on the image plane");
  }
  return f * lateral / den;
}

inline FeatureProjection project(const VehicleState& s,
                                 const FeaturePoint& feat, double f = 1.0,
                                 double t = 0.0) {
  return FeatureProjection{feat.id, image_coord(s, feat.x, feat.y, f), t};
}

/// Time-to-transit of a world point under frozen-heading, constant-speed
/// extrapolation: (along-heading distance - f) / v.
inline double tau_transit(const VehicleState& s, double xf, double yf,
                          double v, double f = 1.0) {
  if (!(v > 0.0)) {
    throw std::invalid_argument("tau_transit: v must be positive");
  }
  const double along =
      std::cos(s.theta) * (xf - s.x) + std::sin(s.theta) * (yf - s.y);
  return (along - f) / v;
}

inline TauEstimate tau_analytic(const VehicleState& s,
                                const FeaturePoint& feat, double v,
                                double f = 1.0, double t = 0.0) {
  return TauEstimate{feat.id, tau_transit(s, feat.x, feat.y, v, f), t};
}

/// Finite-difference configuration: window w means the derivative at
/// sample k uses samples k-w and k+w.
struct DiffOptions {
  std::size_t window = 1;
  double derivative_floor = 1e-12;
};

/// tau estimates at every interior sample of a uniformly sampled image
/// series, tau = d / (central difference of d).
inline std::vector<TauEstimate> tau_series(std::span<const double> d,
                                           double dt, double t0 = 0.0,
                                           const DiffOptions& opts = {},
                                           const std::string& id = {}) {
  const std::size_t w = opts.window;
  if (w == 0 || !(dt > 0.0)) {
    throw std::invalid_argument("tau_series: bad window or time step");
  }
  if (d.size() < 2 * w + 1) {
    throw std::invalid_argument("tau_series: series too short for window");
  }
  std::vector<TauEstimate> out;
  out.reserve(d.size() - 2 * w);
  for (std::size_t k = w; k + w < d.size(); ++k) {
    const double deriv = (d[k + w] - d[k - w]) / (2.0 * w * dt);
    if (std::abs(deriv) < opts.derivative_floor) {
      throw UndefinedTau("tau_series: image derivative below floor");
    }
    out.push_back(TauEstimate{id, d[k] / deriv,
                              t0 + dt * static_cast<double>(k)});
  }
  return out;
}

/// First interior tau estimate of an image-size series; the classic
/// time-to-contact readout under constant closing speed.
inline TauEstimate time_to_contact(std::span<const double> d, double dt,
                                   const DiffOptions& opts = {},
                                   const std::string& id = {}) {
  return tau_series(d, dt, 0.0, opts, id).front();
}

/// tau estimates from a tracked feature's projection history alone --
/// no access to pose or speed. Timestamps need not be uniform.
inline std::vector<TauEstimate> tau_series_from_track(
    std::span<const FeatureProjection> track, const DiffOptions& opts = {}) {
  const std::size_t w = opts.window;
  if (w == 0) {
    throw std::invalid_argument("tau_series_from_track: bad window");
  }
  if (track.size() < 2 * w + 1) {
    throw std::invalid_argument("tau_series_from_track: track too short");
  }
  std::vector<TauEstimate> out;
  out.reserve(track.size() - 2 * w);
  for (std::size_t k = w; k + w < track.size(); ++k) {
    const double dt_span = track[k + w].t - track[k - w].t;
    if (dt_span == 0.0) {
      throw std::invalid_argument(
          "tau_series_from_track: coincident timestamps");
    }
    const double deriv = (track[k + w].d_img - track[k - w].d_img) / dt_span;
    if (std::abs(deriv) < opts.derivative_floor) {
      throw UndefinedTau("tau_series_from_track: derivative below floor");
    }
    out.push_back(
        TauEstimate{track[k].id, track[k].d_img / deriv, track[k].t});
  }
  return out;
}

inline TauEstimate tau_from_track(std::span<const FeatureProjection> track,
                                  const DiffOptions& opts = {}) {
  return tau_series_from_track(track, opts).front();
}

}  // namespace thicket::camera
