#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "thicket/field.hpp"
#include "thicket/types.hpp"

namespace thicket::analytic {

using field::StationaryDistribution;

/// Geometric transit law through stacked rows: p1 per-row pass
/// probability, n rows.
struct TransitLaw {
  StationaryDistribution dist;
  std::size_t n = 0;
};

/// Mean and variance of the number of rows cleared by an uncontrolled
/// straight transit.
struct FreePathStats {
  double mean = 0.0;
  double variance = 0.0;
};

/// Steering authority of the quantized vehicle: the largest
/// instantaneous heading change theta_cr, plus the ratio alpha/gamma
/// that converts it into lateral reach in units of mean slat widths.
struct SteeringModel {
  double theta_cr = 0.0;
  double alpha_over_gamma = 1.0;
};

namespace detail {

// p^n for p in [0, 1], evaluated in log space once p^n would underflow
// the direct pow path (threshold n*|ln p| > 700).
inline double pow_prob(double p, std::size_t n) {
  if (n == 0) return 1.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double log_term = static_cast<double>(n) * std::log(p);
  if (log_term < -700.0) {
    return std::exp(log_term);
  }
  return std::pow(p, static_cast<double>(n));
}

}  // namespace detail

/// Probability of clearing exactly n rows before the first blocked one:
/// p1^n * p2.
inline double p_exact_rows(const StationaryDistribution& d, std::size_t n) {
  return detail::pow_prob(d.p1, n) * d.p2;
}

/// Probability of clearing at least n rows: p1^n.
inline double q_at_least(const StationaryDistribution& d, std::size_t n) {
  return detail::pow_prob(d.p1, n);
}

/// Mean p1/p2 and variance (p1/p2)(1 + p1/p2) of the free path length,
/// in rows.
inline FreePathStats free_path_stats(const StationaryDistribution& d) {
  if (!(d.p2 > 0.0)) {
    throw std::domain_error("free_path_stats: p2 = 0, mean path diverges");
  }
  const double mean = d.p1 / d.p2;
  return FreePathStats{mean, mean * (1.0 + mean)};
}

/// Per-row probability that the steered vehicle clears the row it is
/// approaching: p1 + p2 * (1 - exp(-(alpha/gamma) tan(theta_cr))).
inline double per_row_clear_prob(const StationaryDistribution& d,
                                 const SteeringModel& s) {
  if (!(s.theta_cr >= 0.0) || !(s.theta_cr < kPi / 2.0)) {
    throw std::invalid_argument(
        "per_row_clear_prob: theta_cr must lie in [0, pi/2)");
  }
  const double reach = s.alpha_over_gamma * std::tan(s.theta_cr);
  return d.p1 + d.p2 * (1.0 - std::exp(-reach));
}

/// Probability that a collision-free path exists through n rows under
/// steering authority theta_cr. Nondecreasing in theta_cr, equal to
/// q_at_least at theta_cr = 0, and approaching 1 as theta_cr -> pi/2.
inline double collision_free_prob(const StationaryDistribution& d,
                                  const SteeringModel& s, std::size_t n) {
  return detail::pow_prob(per_row_clear_prob(d, s), n);
}

/// Smallest steering angle at which collision_free_prob reaches target.
/// The map is monotone and continuous in theta_cr, so bisection is
/// unconditionally convergent; the root is bracketed to |dtheta| <= 1e-9.
inline double critical_theta(const StationaryDistribution& d,
                             double alpha_over_gamma, std::size_t n,
                             double target) {
  if (!(target < 1.0)) {
    throw std::domain_error("critical_theta: target must be < 1");
  }
  const double floor_prob = q_at_least(d, n);
  if (target < floor_prob) {
    throw std::domain_error(
        "critical_theta: target below the zero-steering probability");
  }
  if (target == floor_prob) {
    return 0.0;
  }
  double lo = 0.0;
  double hi = kPi / 2.0 - 1e-12;
  const auto prob = [&](double theta) {
    return collision_free_prob(d, SteeringModel{theta, alpha_over_gamma}, n);
  };
  if (prob(hi) < target) {
    throw std::domain_error("critical_theta: target not reachable");
  }
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (prob(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace thicket::analytic
