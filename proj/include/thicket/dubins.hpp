#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "thicket/analytic.hpp"
#include "thicket/field.hpp"
#include "thicket/rng.hpp"
#include "thicket/types.hpp"

namespace thicket::dubins {

/// How the protocol picks the escape side when it arrives on a slat.
///
/// committed_side flips a fair coin and must out-reach the slat edge on
/// that side. The residual width in a fixed direction from a stationary
/// arrival point is a single exponential(alpha) draw, which is exactly
/// the model behind the closed-form row-clear probability; the Monte
/// Carlo experiments therefore validate that formula.
///
/// nearest_edge aims for whichever edge is closer. The minimum of the
/// two i.i.d. exponential(alpha) edge distances is exponential(2*alpha),
/// so this mode clears strictly more often than the closed form predicts
/// and carries no analytic oracle. It is kept for exploration and as the
/// geometry behind steer_decision.
enum class SteerMode { committed_side, nearest_edge };

/// Whether the heading snaps back to the transit axis after each row
/// (rows become i.i.d.) or persists until the next maneuver.
enum class HeadingMode { reset, persist };

struct TransitOptions {
  SteerMode steer = SteerMode::committed_side;
  HeadingMode heading = HeadingMode::reset;
  double clearance_margin = 0.0;
  // Ordinate of the entry line; NaN means one row spacing below the
  // first row.
  double start_ordinate = std::numeric_limits<double>::quiet_NaN();
};

/// Vehicle state between rows: lateral position, index of the next row
/// to face, heading relative to the transit axis.
struct QuantizedState {
  double x = 0.0;
  std::size_t row_index = 0;
  double heading = 0.0;
};

struct TransitOutcome {
  std::size_t rows_cleared = 0;
  bool collided = false;
  // (x, ordinate) vertices: entry point, one per cleared row, plus the
  // impact point when collided.
  std::vector<std::array<double, 2>> path;
};

/// Binomial summary of a Monte Carlo experiment.
struct MCSummary {
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double estimate = 0.0;
  double std_error = 0.0;
};

inline MCSummary summarize(std::uint64_t trials, std::uint64_t successes) {
  MCSummary s;
  s.trials = trials;
  s.successes = successes;
  s.estimate = trials ? static_cast<double>(successes) / trials : 0.0;
  s.std_error =
      trials ? std::sqrt(s.estimate * (1.0 - s.estimate) / trials) : 0.0;
  return s;
}

/// Thrown when a steered path reaches the edge of the sampled window.
/// The caller must widen the window; the Monte Carlo driver does so and
/// retries, and surfaces the trial identity if it keeps failing.
class ExtentExhausted : public std::runtime_error {
 public:
  ExtentExhausted(std::uint64_t trial_index, std::uint64_t trial_seed)
      : std::runtime_error(
            "transit left the sampled extent (trial " +
            std::to_string(trial_index) + ", seed " +
            std::to_string(trial_seed) + "); widen the window to replay"),
        trial_index_(trial_index),
        trial_seed_(trial_seed) {}
  explicit ExtentExhausted(const std::string& what)
      : std::runtime_error(what), trial_index_(0), trial_seed_(0) {}

  std::uint64_t trial_index() const { return trial_index_; }
  std::uint64_t trial_seed() const { return trial_seed_; }

 private:
  std::uint64_t trial_index_;
  std::uint64_t trial_seed_;
};

/// Steering decision against a known row geometry, aiming for the nearer
/// slat edge (ties go left).
///
/// Returns the signed heading change that clears the row, 0 in open
/// space, or nullopt when the nearer edge is beyond the lateral reach
/// row_gap * tan(theta_cr). The optional clearance margin is added to
/// the distance the maneuver must cover.
inline std::optional<double> steer_decision(double x_arrival,
                                            const field::ObstacleRow& row,
                                            double theta_cr, double row_gap,
                                            double clearance_margin = 0.0) {
  if (!(row_gap > 0.0)) {
    throw std::invalid_argument("steer_decision: row_gap must be positive");
  }
  if (!(theta_cr >= 0.0) || !(theta_cr < kPi / 2.0)) {
    throw std::invalid_argument(
        "steer_decision: theta_cr must lie in [0, pi/2)");
  }
  const Interval* slat = field::covering_slat(row, x_arrival);
  if (slat == nullptr) {
    return 0.0;
  }
  const double reach = row_gap * std::tan(theta_cr);
  const double e_left = x_arrival - slat->lo;
  const double e_right = slat->hi - x_arrival;
  const bool go_left = e_left <= e_right;
  const double need = (go_left ? e_left : e_right) + clearance_margin;
  if (need > reach) {
    return std::nullopt;
  }
  const double dtheta = std::atan(need / row_gap);
  return go_left ? -dtheta : dtheta;
}

namespace detail {

struct SideDecision {
  bool feasible = false;
  double x_new = 0.0;
};

// Escape toward one designated side of the covering slat.
inline SideDecision escape_side(const Interval& slat, double x_arrival,
                                bool go_right, double reach, double margin) {
  const double e = go_right ? slat.hi - x_arrival : x_arrival - slat.lo;
  const double need = e + margin;
  if (need > reach) {
    return {};
  }
  return {true, go_right ? x_arrival + need : x_arrival - need};
}

}  // namespace detail

/// Run the row-by-row steering protocol through a sampled field.
///
/// The vehicle travels in straight chords between consecutive rows. At
/// each row it either passes through open space or makes one bounded
/// instantaneous heading change to reach a slat edge; if the required
/// lateral travel exceeds row_gap * tan(theta_cr) it collides. In reset
/// mode the heading returns to the transit axis after every row; in
/// persist mode it is retained and each maneuver is bounded relative to
/// the current heading.
///
/// rng supplies the side coin for committed_side mode and must be
/// non-null there; nearest_edge mode is deterministic.
inline TransitOutcome transit(const field::ObstacleField& f, double x_start,
                              double theta_cr,
                              const TransitOptions& opts = {},
                              Rng* rng = nullptr) {
  if (f.rows.empty()) {
    throw std::invalid_argument("transit: field has no rows");
  }
  if (!(theta_cr >= 0.0) || !(theta_cr < kPi / 2.0)) {
    throw std::invalid_argument("transit: theta_cr must lie in [0, pi/2)");
  }
  if (!f.extent.contains(x_start)) {
    throw std::invalid_argument("transit: x_start outside the field extent");
  }
  if (opts.steer == SteerMode::committed_side && rng == nullptr) {
    throw std::invalid_argument(
        "transit: committed_side mode needs a random stream");
  }

  double prev_ordinate = std::isnan(opts.start_ordinate)
                             ? f.rows.front().ordinate - 1.0 / f.params.gamma
                             : opts.start_ordinate;

  TransitOutcome out;
  out.path.push_back({x_start, prev_ordinate});
  QuantizedState cur{x_start, 0, 0.0};

  for (const field::ObstacleRow& row : f.rows) {
    const double gap = row.ordinate - prev_ordinate;
    if (!(gap > 0.0)) {
      throw std::invalid_argument("transit: rows must be strictly ordered");
    }
    const double x_arrival = cur.x + gap * std::tan(cur.heading);
    if (!f.extent.contains(x_arrival)) {
      throw ExtentExhausted("transit left the sampled extent");
    }

    const Interval* slat = field::covering_slat(row, x_arrival);
    double x_next = x_arrival;
    double heading_next = cur.heading;
    if (slat != nullptr) {
      // A slat clipped at the window boundary is censored: its true
      // edge lies outside the sampled extent, so escaping toward it
      // would consult unknown field.
      const auto censored = [&](bool right) {
        return right ? slat->hi >= row.extent.hi : slat->lo <= row.extent.lo;
      };
      // Largest one-sided lateral travel allowed by a heading change of
      // theta_cr away from the current heading.
      const auto reach_toward = [&](bool right) {
        const double limit = right ? cur.heading + theta_cr
                                   : cur.heading - theta_cr;
        const double lateral = gap * std::tan(limit) - (x_arrival - cur.x);
        return right ? lateral : -lateral;
      };
      bool go_right;
      if (opts.steer == SteerMode::committed_side) {
        go_right = rng->coin();
      } else {
        go_right = slat->hi - x_arrival < x_arrival - slat->lo;
      }
      const detail::SideDecision dec =
          detail::escape_side(*slat, x_arrival, go_right,
                              reach_toward(go_right), opts.clearance_margin);
      if (!dec.feasible) {
        // Valid even against a censored edge: the true edge can only be
        // farther than the clipped one.
        out.collided = true;
        out.path.push_back({x_arrival, row.ordinate});
        return out;
      }
      if (censored(go_right) || !f.extent.contains(dec.x_new)) {
        throw ExtentExhausted("transit left the sampled extent");
      }
      x_next = dec.x_new;
      heading_next = std::atan2(x_next - cur.x, gap);
    }

    out.path.push_back({x_next, row.ordinate});
    ++out.rows_cleared;
    cur.x = x_next;
    cur.row_index += 1;
    cur.heading = opts.heading == HeadingMode::reset ? 0.0 : heading_next;
    prev_ordinate = row.ordinate;
  }
  return out;
}

struct McOptions {
  double entry_window = 20.0;
  // <= 0 means automatic: a slack plus a multiple of the per-row reach
  // scaled with sqrt(n_rows) (side choices form a symmetric random walk).
  double margin = 0.0;
  int max_widenings = 3;
  TransitOptions transit;
  unsigned threads = 1;
};

namespace detail {

inline double auto_margin(double theta_cr, double gamma, std::size_t n_rows) {
  const double reach = std::tan(theta_cr) / gamma;
  return 8.0 + reach * std::max(6.0, 3.0 * std::sqrt(static_cast<double>(
                                           n_rows)));
}

// One trial: fresh flat-row field, uniform entry abscissa, one transit.
// Deterministic given (master_seed, trial).
inline bool run_trial(const field::FieldParams& params, std::size_t n_rows,
                      double theta_cr, std::uint64_t master_seed,
                      std::uint64_t trial, const McOptions& opts) {
  const std::uint64_t field_seed = derive_seed(master_seed, 2 * trial);
  double margin = opts.margin > 0.0
                      ? opts.margin
                      : auto_margin(theta_cr, params.gamma, n_rows);
  for (int attempt = 0;; ++attempt) {
    field::FieldParams trial_params = params;
    trial_params.seed = field_seed;
    const Interval extent{0.0, opts.entry_window + 2.0 * margin};
    const field::ObstacleField f =
        field::sample_field(trial_params, n_rows, extent, /*jitter=*/false);
    Rng rng = Rng::substream(master_seed, 2 * trial + 1);
    const double x0 = margin + opts.entry_window * rng.uniform();
    try {
      return !transit(f, x0, theta_cr, opts.transit, &rng).collided;
    } catch (const ExtentExhausted&) {
      if (attempt >= opts.max_widenings) {
        throw ExtentExhausted(trial, field_seed);
      }
      margin *= 2.0;
    }
  }
}

}  // namespace detail

/// Estimate of the collision-free probability through n_rows flat rows
/// at steering authority theta_cr. Each trial samples a fresh field and
/// a uniform entry abscissa; trial outcomes are a deterministic function
/// of (master_seed, trial index), so thread count does not change the
/// result.
inline MCSummary mc_collision_free(const field::FieldParams& params,
                                   std::size_t n_rows, double theta_cr,
                                   std::uint64_t trials,
                                   std::uint64_t master_seed,
                                   const McOptions& opts = {}) {
  field::validate(params);
  if (trials == 0) {
    throw std::invalid_argument("mc_collision_free: trials must be >= 1");
  }
  const unsigned threads = std::max(1u, opts.threads);
  std::uint64_t successes = 0;
  if (threads == 1) {
    for (std::uint64_t t = 0; t < trials; ++t) {
      successes += detail::run_trial(params, n_rows, theta_cr, master_seed, t,
                                     opts)
                       ? 1
                       : 0;
    }
  } else {
    std::vector<std::uint64_t> partial(threads, 0);
    std::vector<std::thread> workers;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (unsigned w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          std::uint64_t local = 0;
          for (std::uint64_t t = w; t < trials; t += threads) {
            local += detail::run_trial(params, n_rows, theta_cr, master_seed,
                                       t, opts)
                         ? 1
                         : 0;
          }
          partial[w] = local;
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
    for (std::uint64_t c : partial) successes += c;
  }
  return summarize(trials, successes);
}

struct SweepPoint {
  double theta_cr = 0.0;
  std::size_t n_rows = 0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double analytic = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  // First grid angle at which the estimate exceeds 0.99, if any.
  std::optional<double> theta_99;
};

/// Sweep the steering angle over a sorted grid, one Monte Carlo
/// experiment per point, with the closed-form value alongside.
inline SweepResult mc_phase_sweep(const field::FieldParams& params,
                                  std::size_t n_rows,
                                  const std::vector<double>& theta_grid,
                                  std::uint64_t trials_per_point,
                                  std::uint64_t master_seed,
                                  const McOptions& opts = {}) {
  for (std::size_t i = 1; i < theta_grid.size(); ++i) {
    if (!(theta_grid[i - 1] < theta_grid[i])) {
      throw std::invalid_argument(
          "mc_phase_sweep: theta grid must be sorted ascending");
    }
  }
  const auto dist = field::stationary_probs(params.alpha, params.beta);
  SweepResult result;
  result.points.reserve(theta_grid.size());
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    const double theta = theta_grid[i];
    const MCSummary mc =
        mc_collision_free(params, n_rows, theta, trials_per_point,
                          derive_seed(master_seed, 0xC0FFEE00ULL + i), opts);
    SweepPoint p;
    p.theta_cr = theta;
    p.n_rows = n_rows;
    p.trials = mc.trials;
    p.successes = mc.successes;
    p.estimate = mc.estimate;
    p.std_error = mc.std_error;
    p.analytic = analytic::collision_free_prob(
        dist,
        analytic::SteeringModel{theta, params.alpha / params.gamma},
        n_rows);
    if (!result.theta_99 && p.estimate > 0.99) {
      result.theta_99 = theta;
    }
    result.points.push_back(p);
  }
  return result;
}

}  // namespace thicket::dubins
