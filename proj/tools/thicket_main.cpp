// thicket -- experiments with steered flight through random slat fields.
//
// Subcommands:
//   generate-field   sample a field and write it as JSON
//   analytic-table   closed-form transit probabilities over an (n, theta) grid
//   mc-sweep         Monte Carlo of the steering protocol vs the closed form
//   fly              closed-loop flight scenarios (gate, circle, clutter)
//
// Exit codes: 0 success, 2 validation error, 3 --check failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "thicket/thicket.hpp"

namespace {

using nlohmann::json;
using namespace thicket;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;
constexpr int kExitCheckFailed = 3;

json load_config(const std::string& path) {
  if (path.empty()) {
    return json::object();
  }
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config file: " + path);
  }
  json j;
  in >> j;
  if (!j.is_object()) {
    throw std::invalid_argument("config file must hold a JSON object");
  }
  return j;
}

// Config-file values fill in options the command line left untouched.
template <typename T>
void cfg_fill(const json& cfg, const CLI::Option* opt, const char* key,
              T& var) {
  if (opt->count() == 0 && cfg.contains(key)) {
    var = cfg.at(key).get<T>();
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::invalid_argument("cannot open output file: " + path);
  }
  return out;
}

std::uint64_t resolve_seed(const CLI::Option* seed_opt, const json& cfg,
                           std::uint64_t seed_var) {
  std::uint64_t seed = seed_var;
  if (seed_opt->count() == 0 && !cfg.contains("seed")) {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  } else if (seed_opt->count() == 0) {
    seed = cfg.at("seed").get<std::uint64_t>();
  }
  std::cout << "master seed: " << seed << "\n";
  return seed;
}

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool check = false;
};

int cmd_generate_field(const CommonOpts& common, const json& cfg,
                       field::FieldParams params, std::size_t n_rows,
                       double width, bool jitter) {
  field::validate(params);
  if (n_rows == 0) {
    throw std::invalid_argument("generate-field: --n-rows must be >= 1");
  }
  if (!(width > 0.0)) {
    throw std::invalid_argument("generate-field: --width must be positive");
  }
  const auto f =
      field::sample_field(params, n_rows, Interval{0.0, width}, jitter);
  const std::string path =
      common.out_path.empty() ? "field.json" : common.out_path;
  io::save_field(f, path);
  std::cout << "wrote " << path << " (" << f.rows.size() << " rows)\n";
  (void)cfg;
  return kExitOk;
}

json echo_analytic(const field::FieldParams& p,
                   const std::vector<std::size_t>& n_list,
                   const std::vector<double>& theta_list) {
  return json{{"command", "analytic-table"}, {"alpha", p.alpha},
              {"beta", p.beta},              {"gamma", p.gamma},
              {"n", n_list},                 {"theta", theta_list}};
}

int cmd_analytic_table(const CommonOpts& common, const field::FieldParams& p,
                       const std::vector<std::size_t>& n_list,
                       const std::vector<double>& theta_list) {
  field::validate(p);
  if (n_list.empty() || theta_list.empty()) {
    throw std::invalid_argument("analytic-table: empty grid");
  }
  const auto dist = field::stationary_probs(p.alpha, p.beta);
  std::vector<dubins::SweepPoint> pts;
  for (std::size_t n : n_list) {
    for (double theta : theta_list) {
      dubins::SweepPoint pt;
      pt.n_rows = n;
      pt.theta_cr = theta;
      pt.analytic = analytic::collision_free_prob(
          dist, analytic::SteeringModel{theta, p.alpha / p.gamma}, n);
      pts.push_back(pt);
    }
  }
  const json echo = echo_analytic(p, n_list, theta_list);
  const std::string path =
      common.out_path.empty() ? "analytic_table.csv" : common.out_path;
  auto out = open_out(path);
  if (common.format == "json") {
    io::write_sweep_json(out, pts, &echo);
  } else {
    io::write_analytic_table(out, pts, &echo);
  }
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_mc_sweep(const CommonOpts& common, const field::FieldParams& p,
                 std::size_t n_rows, const std::vector<double>& theta_list,
                 std::uint64_t trials, const std::string& steer_mode) {
  field::validate(p);
  if (theta_list.empty()) {
    throw std::invalid_argument("mc-sweep: empty theta grid");
  }
  if (trials == 0) {
    throw std::invalid_argument("mc-sweep: --trials must be >= 1");
  }
  dubins::McOptions opts;
  opts.threads = common.threads;
  if (steer_mode == "nearest") {
    opts.transit.steer = dubins::SteerMode::nearest_edge;
  } else if (steer_mode != "committed") {
    throw std::invalid_argument("mc-sweep: unknown steer mode '" +
                                steer_mode + "'");
  }
  const auto sweep = dubins::mc_phase_sweep(p, n_rows, theta_list, trials,
                                            common.seed, opts);
  json echo{{"command", "mc-sweep"}, {"alpha", p.alpha},
            {"beta", p.beta},        {"gamma", p.gamma},
            {"n", n_rows},           {"theta", theta_list},
            {"trials", trials},      {"seed", common.seed},
            {"steer_mode", steer_mode}};

  const std::string path =
      common.out_path.empty() ? "mc_sweep.csv" : common.out_path;
  auto out = open_out(path);
  if (common.format == "json") {
    io::write_sweep_json(out, sweep.points, &echo);
  } else {
    io::write_sweep_csv(out, sweep.points, &echo);
  }
  if (sweep.theta_99) {
    std::cout << "first grid angle with estimate > 0.99: "
              << io::fmt(*sweep.theta_99, 12) << "\n";
  }
  std::cout << "wrote " << path << "\n";

  if (common.check) {
    bool ok = true;
    for (const auto& pt : sweep.points) {
      const double se_null =
          std::sqrt(pt.analytic * (1.0 - pt.analytic) /
                    static_cast<double>(pt.trials));
      const double band = 3.0 * std::max(pt.std_error, se_null);
      if (std::abs(pt.estimate - pt.analytic) > band) {
        std::cerr << "check failed at theta_cr=" << pt.theta_cr
                  << ": estimate " << pt.estimate << " vs analytic "
                  << pt.analytic << " (band " << band << ")\n";
        ok = false;
      }
    }
    if (!ok) {
      return kExitCheckFailed;
    }
    std::cout << "check passed: all points within 3 standard errors\n";
  }
  return kExitOk;
}

struct FlyOpts {
  std::string scenario;
  double start_x = 0.0, start_y = 0.0, start_theta = kPi / 2.0;
  double dt = 1e-3, t_max = 60.0;
  std::string sensor = "derotated";
  // gate
  double gate_left_x = -1.0, gate_right_x = 1.0, gate_y = 10.0;
  double epsilon = 1e-3, v_cap = 1.0;
  // circle
  double goal_x = 0.0, goal_y = 0.0, lambda = 0.5, standoff = 1.0;
  std::string orientation = "ccw";
  // clutter
  std::string field_path;
  std::size_t n_rows = 10;
  double width = 200.0;
};

sim::TauSensor parse_sensor(const std::string& name) {
  if (name == "derotated") return sim::TauSensor::derotated_track;
  if (name == "kinematic") return sim::TauSensor::kinematic;
  throw std::invalid_argument("fly: unknown sensor '" + name + "'");
}

int cmd_fly(const CommonOpts& common, const field::FieldParams& params,
            const FlyOpts& fly) {
  if (fly.scenario.empty()) {
    throw std::invalid_argument(
        "fly: --scenario (or a config with one) is required");
  }
  sim::Trajectory traj;
  json echo{{"command", "fly"},
            {"scenario", fly.scenario},
            {"start_x", fly.start_x},
            {"start_y", fly.start_y},
            {"start_theta", fly.start_theta},
            {"dt", fly.dt},
            {"t_max", fly.t_max},
            {"seed", common.seed}};

  if (fly.scenario == "gate") {
    sim::GateScenario sc;
    sc.left = FeaturePoint{"left", fly.gate_left_x, fly.gate_y};
    sc.right = FeaturePoint{"right", fly.gate_right_x, fly.gate_y};
    sc.start = VehicleState{fly.start_x, fly.start_y, fly.start_theta};
    sc.gains = control::GateGains{fly.epsilon, fly.v_cap};
    sc.dt = fly.dt;
    sc.t_max = fly.t_max;
    sc.sensor = parse_sensor(fly.sensor);
    echo.update(json{{"gate_left_x", fly.gate_left_x},
                     {"gate_right_x", fly.gate_right_x},
                     {"gate_y", fly.gate_y},
                     {"epsilon", fly.epsilon},
                     {"v_cap", fly.v_cap},
                     {"sensor", fly.sensor}});
    traj = sim::run_gate(sc);
  } else if (fly.scenario == "circle") {
    sim::CircleScenario sc;
    sc.goal = FeaturePoint{"goal", fly.goal_x, fly.goal_y};
    sc.gains = control::CircleGains{fly.lambda, fly.standoff};
    sc.start = VehicleState{fly.start_x, fly.start_y, fly.start_theta};
    sc.orientation = fly.orientation == "cw" ? control::Orientation::cw
                                             : control::Orientation::ccw;
    sc.dt = fly.dt;
    sc.t_max = fly.t_max;
    echo.update(json{{"goal_x", fly.goal_x},
                     {"goal_y", fly.goal_y},
                     {"lambda", fly.lambda},
                     {"standoff", fly.standoff},
                     {"orientation", fly.orientation}});
    traj = sim::run_circle(sc);
  } else if (fly.scenario == "clutter") {
    field::ObstacleField f;
    if (!fly.field_path.empty()) {
      f = io::load_field(fly.field_path);
      echo["field"] = fly.field_path;
    } else {
      field::FieldParams p = params;
      p.seed = common.seed;
      f = field::sample_field(p, fly.n_rows, Interval{0.0, fly.width});
      echo.update(json{{"alpha", p.alpha},
                       {"beta", p.beta},
                       {"gamma", p.gamma},
                       {"n_rows", fly.n_rows},
                       {"width", fly.width}});
    }
    sim::ClutterScenario sc;
    sc.gains = control::GateGains{fly.epsilon, fly.v_cap};
    sc.start = VehicleState{fly.start_x, fly.start_y, fly.start_theta};
    sc.dt = fly.dt;
    sc.t_max = fly.t_max;
    sc.sensor = parse_sensor(fly.sensor);
    echo.update(json{{"epsilon", fly.epsilon},
                     {"v_cap", fly.v_cap},
                     {"sensor", fly.sensor}});
    traj = sim::run_clutter_flight(f, sc);
  } else {
    throw std::invalid_argument("fly: unknown scenario '" + fly.scenario +
                                "'");
  }

  const std::string path =
      common.out_path.empty() ? "trajectory.csv" : common.out_path;
  if (common.format == "json") {
    auto out = open_out(path);
    out << io::trajectory_to_json(traj, &echo).dump(2) << "\n";
  } else {
    auto out = open_out(path);
    io::write_trajectory_csv(out, traj, &echo);
    auto ev = open_out(path + ".events.json");
    ev << io::events_to_json(traj, &echo).dump(2) << "\n";
  }
  for (const auto& e : traj.events) {
    std::cout << "event t=" << e.t << " " << e.kind << "\n";
  }
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steered flight through random slat fields"};
  app.require_subcommand(1);

  CommonOpts common;
  field::FieldParams params;
  std::size_t n_rows = 10;
  double width = 200.0;
  bool jitter = false;
  std::vector<std::size_t> n_list;
  std::vector<double> theta_list;
  std::uint64_t trials = 10000;
  FlyOpts fly;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path,
                    "JSON config file; command-line flags take precedence");
    cmd->add_option("--out", common.out_path, "output file path");
    cmd->add_option("--format", common.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--threads", common.threads, "worker threads");
    return cmd->add_option("--seed", common.seed, "master seed (64-bit)");
  };

  auto* gen = app.add_subcommand("generate-field", "sample a slat field");
  auto* gen_seed = add_common(gen);
  auto* gen_alpha = gen->add_option("--alpha", params.alpha, "slat rate");
  auto* gen_beta = gen->add_option("--beta", params.beta, "gap rate");
  auto* gen_gamma = gen->add_option("--gamma", params.gamma, "row rate");
  auto* gen_rows = gen->add_option("--n-rows", n_rows, "number of rows");
  auto* gen_width = gen->add_option("--width", width, "extent width");
  auto* gen_jitter =
      gen->add_flag("--jitter", jitter, "exponential row displacement");

  auto* tab = app.add_subcommand("analytic-table",
                                 "closed-form probability table");
  add_common(tab);
  auto* tab_alpha = tab->add_option("--alpha", params.alpha, "slat rate");
  auto* tab_beta = tab->add_option("--beta", params.beta, "gap rate");
  auto* tab_gamma = tab->add_option("--gamma", params.gamma, "row rate");
  auto* tab_n = tab->add_option("--n", n_list, "row counts");
  auto* tab_theta = tab->add_option("--theta", theta_list, "steering angles");

  auto* mc = app.add_subcommand("mc-sweep",
                                "Monte Carlo sweep over steering angles");
  auto* mc_seed = add_common(mc);
  mc->add_flag("--check", common.check,
               "exit 3 unless every point is within 3 standard errors of "
               "the closed form");
  std::string steer_mode = "committed";
  auto* mc_alpha = mc->add_option("--alpha", params.alpha, "slat rate");
  auto* mc_beta = mc->add_option("--beta", params.beta, "gap rate");
  auto* mc_gamma = mc->add_option("--gamma", params.gamma, "row rate");
  auto* mc_n = mc->add_option("--n", n_rows, "number of rows");
  auto* mc_theta = mc->add_option("--theta", theta_list, "steering angles");
  auto* mc_trials = mc->add_option("--trials", trials, "trials per point");
  auto* mc_steer =
      mc->add_option("--steer-mode", steer_mode,
                     "escape-side rule: committed (matches the closed "
                     "form) | nearest (exploration, clears more often)")
          ->check(CLI::IsMember({"committed", "nearest"}));

  auto* flyc = app.add_subcommand("fly", "closed-loop flight scenario");
  auto* fly_seed = add_common(flyc);
  auto* fly_scn =
      flyc->add_option("--scenario", fly.scenario, "gate | circle | clutter");
  auto* fly_sx = flyc->add_option("--start-x", fly.start_x, "");
  auto* fly_sy = flyc->add_option("--start-y", fly.start_y, "");
  auto* fly_st = flyc->add_option("--start-theta", fly.start_theta, "");
  auto* fly_dt = flyc->add_option("--dt", fly.dt, "integration step");
  auto* fly_tm = flyc->add_option("--t-max", fly.t_max, "time horizon");
  auto* fly_sensor =
      flyc->add_option("--sensor", fly.sensor, "derotated | kinematic");
  auto* fly_glx = flyc->add_option("--gate-left-x", fly.gate_left_x, "");
  auto* fly_grx = flyc->add_option("--gate-right-x", fly.gate_right_x, "");
  auto* fly_gy = flyc->add_option("--gate-y", fly.gate_y, "");
  auto* fly_eps = flyc->add_option("--epsilon", fly.epsilon, "");
  auto* fly_vcap = flyc->add_option("--v-cap", fly.v_cap, "");
  auto* fly_gx = flyc->add_option("--goal-x", fly.goal_x, "");
  auto* fly_gyy = flyc->add_option("--goal-y", fly.goal_y, "");
  auto* fly_lam = flyc->add_option("--lambda", fly.lambda, "");
  auto* fly_d = flyc->add_option("--standoff", fly.standoff, "");
  auto* fly_or = flyc->add_option("--orientation", fly.orientation,
                                  "ccw | cw");
  auto* fly_field = flyc->add_option("--field", fly.field_path,
                                     "field JSON for the clutter scenario");
  auto* fly_alpha = flyc->add_option("--alpha", params.alpha, "");
  auto* fly_beta = flyc->add_option("--beta", params.beta, "");
  auto* fly_gamma = flyc->add_option("--gamma", params.gamma, "");
  auto* fly_nr = flyc->add_option("--n-rows", fly.n_rows, "");
  auto* fly_w = flyc->add_option("--width", fly.width, "");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    const json cfg = load_config(common.config_path);

    if (gen->parsed()) {
      cfg_fill(cfg, gen_alpha, "alpha", params.alpha);
      cfg_fill(cfg, gen_beta, "beta", params.beta);
      cfg_fill(cfg, gen_gamma, "gamma", params.gamma);
      cfg_fill(cfg, gen_rows, "n_rows", n_rows);
      cfg_fill(cfg, gen_width, "width", width);
      cfg_fill(cfg, gen_jitter, "jitter", jitter);
      params.seed = resolve_seed(gen_seed, cfg, common.seed);
      return cmd_generate_field(common, cfg, params, n_rows, width, jitter);
    }
    if (tab->parsed()) {
      cfg_fill(cfg, tab_alpha, "alpha", params.alpha);
      cfg_fill(cfg, tab_beta, "beta", params.beta);
      cfg_fill(cfg, tab_gamma, "gamma", params.gamma);
      cfg_fill(cfg, tab_n, "n", n_list);
      cfg_fill(cfg, tab_theta, "theta", theta_list);
      return cmd_analytic_table(common, params, n_list, theta_list);
    }
    if (mc->parsed()) {
      cfg_fill(cfg, mc_alpha, "alpha", params.alpha);
      cfg_fill(cfg, mc_beta, "beta", params.beta);
      cfg_fill(cfg, mc_gamma, "gamma", params.gamma);
      cfg_fill(cfg, mc_n, "n", n_rows);
      cfg_fill(cfg, mc_theta, "theta", theta_list);
      cfg_fill(cfg, mc_trials, "trials", trials);
      cfg_fill(cfg, mc_steer, "steer_mode", steer_mode);
      common.seed = resolve_seed(mc_seed, cfg, common.seed);
      return cmd_mc_sweep(common, params, n_rows, theta_list, trials,
                          steer_mode);
    }
    if (flyc->parsed()) {
      cfg_fill(cfg, fly_scn, "scenario", fly.scenario);
      cfg_fill(cfg, fly_sx, "start_x", fly.start_x);
      cfg_fill(cfg, fly_sy, "start_y", fly.start_y);
      cfg_fill(cfg, fly_st, "start_theta", fly.start_theta);
      cfg_fill(cfg, fly_dt, "dt", fly.dt);
      cfg_fill(cfg, fly_tm, "t_max", fly.t_max);
      cfg_fill(cfg, fly_sensor, "sensor", fly.sensor);
      cfg_fill(cfg, fly_glx, "gate_left_x", fly.gate_left_x);
      cfg_fill(cfg, fly_grx, "gate_right_x", fly.gate_right_x);
      cfg_fill(cfg, fly_gy, "gate_y", fly.gate_y);
      cfg_fill(cfg, fly_eps, "epsilon", fly.epsilon);
      cfg_fill(cfg, fly_vcap, "v_cap", fly.v_cap);
      cfg_fill(cfg, fly_gx, "goal_x", fly.goal_x);
      cfg_fill(cfg, fly_gyy, "goal_y", fly.goal_y);
      cfg_fill(cfg, fly_lam, "lambda", fly.lambda);
      cfg_fill(cfg, fly_d, "standoff", fly.standoff);
      cfg_fill(cfg, fly_or, "orientation", fly.orientation);
      cfg_fill(cfg, fly_field, "field", fly.field_path);
      cfg_fill(cfg, fly_alpha, "alpha", params.alpha);
      cfg_fill(cfg, fly_beta, "beta", params.beta);
      cfg_fill(cfg, fly_gamma, "gamma", params.gamma);
      cfg_fill(cfg, fly_nr, "n_rows", fly.n_rows);
      cfg_fill(cfg, fly_w, "width", fly.width);
      common.seed = resolve_seed(fly_seed, cfg, common.seed);
      return cmd_fly(common, params, fly);
    }
    return kExitValidation;
  } catch (const dubins::ExtentExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
