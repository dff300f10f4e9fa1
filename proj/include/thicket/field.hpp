#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "thicket/rng.hpp"
#include "thicket/types.hpp"

namespace thicket::field {

/// Rate parameters of the Markov slat process.
///
/// A row is an alternating sequence of closed obstacle slats and open
/// gaps. Slat widths are exponential with rate alpha (mean 1/alpha),
/// gap widths exponential with rate beta (mean 1/beta). gamma sets the
/// row spacing 1/gamma and, when jitter is enabled, the rate of the
/// per-row vertical displacement.
struct FieldParams {
  double alpha = 1.0;
  double beta = 0.1;
  double gamma = 0.1;
  std::uint64_t seed = 0;
};

inline void validate(const FieldParams& p) {
  if (!(p.alpha > 0.0) || !(p.beta > 0.0) || !(p.gamma > 0.0)) {
    throw std::invalid_argument("field: rate parameters must be positive");
  }
}

/// Long-run fraction of the line lying in open space (p1) / on a slat
/// (p2). p2 is stored as 1 - p1 so the pair sums to one exactly.
struct StationaryDistribution {
  double p1 = 0.0;
  double p2 = 0.0;
};

inline StationaryDistribution stationary_probs(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("stationary_probs: rates must be positive");
  }
  StationaryDistribution d;
  d.p1 = alpha / (alpha + beta);
  d.p2 = 1.0 - d.p1;
  return d;
}

/// One row of obstacles: closed slat intervals along the line
/// y = ordinate, clipped to the sampled extent. Slats are strictly
/// increasing and pairwise disjoint.
struct ObstacleRow {
  double ordinate = 0.0;
  Interval extent;
  std::vector<Interval> slats;
};

/// Sample one row from the stationary law, consuming draws from rng.
///
/// The phase at the left edge is drawn from the stationary distribution;
/// by memorylessness the residual length of the straddling segment is a
/// fresh exponential, which makes the finite window statistically
/// indistinguishable from a window of the infinite-line process.
inline ObstacleRow sample_row(const FieldParams& p, double ordinate,
                              Interval extent, Rng& rng) {
  validate(p);
  if (extent.empty()) {
    throw std::invalid_argument("sample_row: extent is empty");
  }
  ObstacleRow row;
  row.ordinate = ordinate;
  row.extent = extent;

  const double p1 = p.alpha / (p.alpha + p.beta);
  double pos = extent.lo;
  bool on_slat = rng.uniform() >= p1;
  while (pos < extent.hi) {
    if (on_slat) {
      const double end = pos + rng.exponential(p.alpha);
      const double hi = std::min(end, extent.hi);
      if (hi > pos) {
        row.slats.push_back(Interval{pos, hi});
      }
      pos = end;
    } else {
      pos += rng.exponential(p.beta);
    }
    on_slat = !on_slat;
  }
  return row;
}

/// Deterministic form: the row's stream is derived from the master seed
/// and the ordinate's bit pattern, so the same (params, ordinate, extent)
/// always yields the same slats.
inline ObstacleRow sample_row(const FieldParams& p, double ordinate,
                              Interval extent) {
  Rng rng = Rng::substream(p.seed, std::bit_cast<std::uint64_t>(ordinate));
  return sample_row(p, ordinate, extent, rng);
}

/// Rows stacked in the transit direction, sorted by ordinate.
struct ObstacleField {
  FieldParams params;
  Interval extent;
  std::vector<ObstacleRow> rows;
};

/// Sample an n-row field. Row k (1-based) sits at ordinate k/gamma; with
/// jitter enabled each row is additionally displaced by an exponential
/// draw with rate gamma. Per-row streams are derived from (seed, k), so
/// rows are independent and may be generated in any order.
///
/// Jittered displacements can reorder rows; the result is re-sorted so
/// the ordinate sequence stays strictly increasing.
// TODO: per-obstacle (rather than per-row) vertical displacement mode.
inline ObstacleField sample_field(const FieldParams& p, std::size_t n_rows,
                                  Interval extent, bool jitter = false) {
  validate(p);
  if (n_rows == 0) {
    throw std::invalid_argument("sample_field: n_rows must be >= 1");
  }
  if (extent.empty()) {
    throw std::invalid_argument("sample_field: extent is empty");
  }
  ObstacleField f;
  f.params = p;
  f.extent = extent;
  f.rows.reserve(n_rows);
  const double spacing = 1.0 / p.gamma;
  for (std::size_t k = 1; k <= n_rows; ++k) {
    Rng rng = Rng::substream(p.seed, static_cast<std::uint64_t>(k));
    double ordinate = spacing * static_cast<double>(k);
    if (jitter) {
      ordinate += rng.exponential(p.gamma);
    }
    f.rows.push_back(sample_row(p, ordinate, extent, rng));
  }
  std::stable_sort(f.rows.begin(), f.rows.end(),
                   [](const ObstacleRow& a, const ObstacleRow& b) {
                     return a.ordinate < b.ordinate;
                   });
  return f;
}

/// Slat covering s, or nullptr if s lies in open space. Throws
/// std::out_of_range outside the sampled extent: there the field is
/// unknown, not open.
inline const Interval* covering_slat(const ObstacleRow& row, double s) {
  if (!row.extent.contains(s)) {
    throw std::out_of_range("occupancy query outside sampled extent");
  }
  auto it = std::upper_bound(
      row.slats.begin(), row.slats.end(), s,
      [](double v, const Interval& slat) { return v < slat.lo; });
  if (it == row.slats.begin()) {
    return nullptr;
  }
  --it;
  return s <= it->hi ? &*it : nullptr;
}

/// True iff s lies on a slat. Slats are closed: endpoints count as
/// occupied.
inline bool occupancy(const ObstacleRow& row, double s) {
  return covering_slat(row, s) != nullptr;
}

inline double occupied_length(const ObstacleRow& row) {
  double total = 0.0;
  for (const Interval& s : row.slats) {
    total += s.length();
  }
  return total;
}

}  // namespace thicket::field
