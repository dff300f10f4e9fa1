#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "thicket/camera.hpp"
#include "thicket/dubins.hpp"
#include "thicket/field.hpp"
#include "thicket/sim.hpp"

namespace thicket::io {

using nlohmann::json;

/// Format a double with up to 17 significant digits (lossless) or any
/// explicit precision.
inline std::string fmt(double v, int sig_digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Field serialization
// ---------------------------------------------------------------------------

inline json field_to_json(const field::ObstacleField& f) {
  json rows = json::array();
  for (const auto& row : f.rows) {
    json slats = json::array();
    for (const auto& s : row.slats) {
      slats.push_back(json::array({s.lo, s.hi}));
    }
    rows.push_back(json{{"ordinate", row.ordinate}, {"slats", slats}});
  }
  return json{{"alpha", f.params.alpha},
              {"beta", f.params.beta},
              {"gamma", f.params.gamma},
              {"seed", f.params.seed},
              {"extent", json::array({f.extent.lo, f.extent.hi})},
              {"rows", rows}};
}

inline field::ObstacleField field_from_json(const json& j) {
  field::ObstacleField f;
  f.params.alpha = j.at("alpha").get<double>();
  f.params.beta = j.at("beta").get<double>();
  f.params.gamma = j.at("gamma").get<double>();
  f.params.seed = j.at("seed").get<std::uint64_t>();
  field::validate(f.params);
  f.extent = Interval{j.at("extent").at(0).get<double>(),
                      j.at("extent").at(1).get<double>()};
  if (f.extent.empty()) {
    throw std::invalid_argument("field document: empty extent");
  }
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& jr : j.at("rows")) {
    field::ObstacleRow row;
    row.ordinate = jr.at("ordinate").get<double>();
    row.extent = f.extent;
    if (!(row.ordinate > prev)) {
      throw std::invalid_argument(
          "field document: ordinates must be strictly increasing");
    }
    prev = row.ordinate;
    double last_hi = -std::numeric_limits<double>::infinity();
    for (const auto& js : jr.at("slats")) {
      Interval s{js.at(0).get<double>(), js.at(1).get<double>()};
      if (!(s.hi > s.lo) || !(s.lo > last_hi)) {
        throw std::invalid_argument(
            "field document: slats must be disjoint, increasing intervals");
      }
      last_hi = s.hi;
      row.slats.push_back(s);
    }
    f.rows.push_back(std::move(row));
  }
  return f;
}

inline void save_field(const field::ObstacleField& f,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << field_to_json(f).dump(2) << "\n";
}

inline field::ObstacleField load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open field file: " + path);
  }
  json j;
  in >> j;
  return field_from_json(j);
}

// ---------------------------------------------------------------------------
// Tabular output
// ---------------------------------------------------------------------------

/// Analytic probability table rows at 12 significant digits.
inline void write_analytic_table(std::ostream& out,
                                 const std::vector<dubins::SweepPoint>& pts,
                                 const json* config_echo = nullptr) {
  if (config_echo) {
    out << "# config: " << config_echo->dump() << "\n";
  }
  out << "n,theta_cr,p_analytic\n";
  for (const auto& p : pts) {
    out << p.n_rows << "," << fmt(p.theta_cr, 12) << ","
        << fmt(p.analytic, 12) << "\n";
  }
}

inline void write_sweep_csv(std::ostream& out,
                            const std::vector<dubins::SweepPoint>& pts,
                            const json* config_echo = nullptr) {
  if (config_echo) {
    out << "# config: " << config_echo->dump() << "\n";
  }
  out << "theta_cr,n,trials,successes,estimate,stderr,analytic\n";
  for (const auto& p : pts) {
    out << fmt(p.theta_cr, 12) << "," << p.n_rows << "," << p.trials << ","
        << p.successes << "," << fmt(p.estimate, 12) << ","
        << fmt(p.std_error, 12) << "," << fmt(p.analytic, 12) << "\n";
  }
}

inline void write_sweep_json(std::ostream& out,
                             const std::vector<dubins::SweepPoint>& pts,
                             const json* config_echo = nullptr) {
  json arr = json::array();
  for (const auto& p : pts) {
    arr.push_back(json{{"theta_cr", p.theta_cr},
                       {"n", p.n_rows},
                       {"trials", p.trials},
                       {"successes", p.successes},
                       {"estimate", p.estimate},
                       {"stderr", p.std_error},
                       {"analytic", p.analytic}});
  }
  json doc{{"schema", 1}, {"points", arr}};
  if (config_echo) {
    doc["config"] = *config_echo;
  }
  out << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Feature track logs
// ---------------------------------------------------------------------------

inline void write_track_csv(std::ostream& out,
                            std::span<const camera::FeatureProjection> track) {
  out << "t,feature_id,d_img\n";
  for (const auto& p : track) {
    out << fmt(p.t) << "," << p.id << "," << fmt(p.d_img) << "\n";
  }
}

inline void write_tau_csv(std::ostream& out,
                          std::span<const camera::TauEstimate> taus) {
  out << "t,feature_id,tau\n";
  for (const auto& e : taus) {
    out << fmt(e.t) << "," << e.id << "," << fmt(e.tau) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Trajectory output
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& out,
                                 const sim::Trajectory& traj,
                                 const json* config_echo = nullptr) {
  if (config_echo) {
    out << "# config: " << config_echo->dump() << "\n";
  }
  out << "t,x,y,theta,v,omega,d_l,d_r,tau_l,tau_r\n";
  for (const auto& s : traj.samples) {
    out << fmt(s.t) << "," << fmt(s.state.x) << "," << fmt(s.state.y) << ","
        << fmt(s.state.theta) << "," << fmt(s.u.v) << "," << fmt(s.u.omega);
    if (s.has_gate) {
      out << "," << fmt(s.d_left) << "," << fmt(s.d_right) << ","
          << fmt(s.tau_left) << "," << fmt(s.tau_right);
    } else {
      out << ",,,,";
    }
    out << "\n";
  }
}

inline json events_to_json(const sim::Trajectory& traj,
                           const json* config_echo = nullptr) {
  json arr = json::array();
  for (const auto& e : traj.events) {
    json je{{"t", e.t}, {"kind", e.kind}};
    for (const auto& [k, v] : e.data) {
      je[k] = v;
    }
    arr.push_back(je);
  }
  json doc{{"schema", 1}, {"events", arr}};
  if (config_echo) {
    doc["config"] = *config_echo;
  }
  return doc;
}

inline json trajectory_to_json(const sim::Trajectory& traj,
                               const json* config_echo = nullptr) {
  json samples = json::array();
  for (const auto& s : traj.samples) {
    json js{{"t", s.t},       {"x", s.state.x}, {"y", s.state.y},
            {"theta", s.state.theta}, {"v", s.u.v},     {"omega", s.u.omega}};
    if (s.has_gate) {
      js["d_l"] = s.d_left;
      js["d_r"] = s.d_right;
      js["tau_l"] = s.tau_left;
      js["tau_r"] = s.tau_right;
    }
    samples.push_back(js);
  }
  json doc = events_to_json(traj, config_echo);
  doc["samples"] = samples;
  return doc;
}

}  // namespace thicket::io
