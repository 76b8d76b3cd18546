// Copyright 2026 The bddp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bddp/ddp.hpp"
#include "bddp/domains/hand_eye.hpp"
#include "bddp/domains/lqg.hpp"
#include "bddp/domains/planar_nav.hpp"
#include "bddp/execution.hpp"

namespace bddp {

inline constexpr int kSchemaVersion = 1;

/// Config file problems and missing prerequisites (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures while writing artifacts (exit status 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  int max_iterations = 500;
  double convergence_tol = 1e-7;
  int converged_iterations = 2;
  double reg_init = 1e-9;
  double reg_min = 1e-9;
  double reg_max = 1e9;
  double reg_increase = 10.0;
  double reg_decrease = 0.5;
  double line_search_floor = 1e-4;
  double fd_step = 1e-5;
  double fd_step_hessian = 1e-3;
  // Default is resolved per domain at parse time: true for the smooth
  // hand_eye beliefs, false for piecewise-smooth constrained domains.
  bool second_order_dynamics = false;

  DdpOptions to_options() const {
    DdpOptions o;
    o.max_iterations = max_iterations;
    o.convergence_tol = convergence_tol;
    o.converged_iterations = converged_iterations;
    o.reg_init = reg_init;
    o.reg_min = reg_min;
    o.reg_max = reg_max;
    o.reg_increase = reg_increase;
    o.reg_decrease = reg_decrease;
    o.line_search_floor = line_search_floor;
    o.fd_step = fd_step;
    o.fd_step_hessian = fd_step_hessian;
    o.second_order_dynamics = second_order_dynamics;
    return o;
  }
};

struct RolloutRunConfig {
  int seeds = 20;
  std::uint64_t seed_base = 1;
  bool sample_initial_state = true;
  bool noise_free = false;
  // Ground-truth shift of the believed obstacle positions (hand_eye only):
  // flat [dx1, dy1, ..., dx4, dy4].
  std::vector<double> obstacle_shift;
  // Directory holding policy.json from a prior solve; defaults to the
  // rollout's own output directory.
  std::string solve_dir;
};

struct LqgRunConfig {
  int n = 4;
  int m = 2;
  std::uint64_t seed = 0;
  int horizon = 50;
};

struct RunConfig {
  std::string domain;  // planar_nav | hand_eye | lqg
  PlanarNavConfig planar;
  HandEyeConfig hand_eye;
  LqgRunConfig lqg;
  SolverConfig solver;
  std::vector<double> schedule;  // shaping values; hand_eye: eta per stage
  RolloutRunConfig rollout;
  std::string output_dir;
};

namespace detail {

// Strict field access: every key must be known, types must match, absent
// keys fall back to defaults. Paths appear in diagnostics.
class FieldReader {
 public:
  FieldReader(nlohmann::json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  double number(const char* key, double def) {
    if (!mark(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    return v.get<double>();
  }

  int integer(const char* key, int def) {
    if (!mark(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    return v.get<int>();
  }

  std::uint64_t uinteger(const char* key, std::uint64_t def) {
    if (!mark(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(field(key) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool def) {
    if (!mark(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected a boolean");
    return v.get<bool>();
  }

  std::string str(const char* key, std::string def) {
    if (!mark(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> number_list(const char* key, std::vector<double> def) {
    if (!mark(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Eigen::Vector2d vec2(const char* key, Eigen::Vector2d def) {
    if (!mark(key)) return def;
    const auto v = number_list_of(key, 2);
    return Eigen::Vector2d(v[0], v[1]);
  }

  std::vector<Eigen::Vector2d> vec2_list(const char* key, std::vector<Eigen::Vector2d> def) {
    if (!mark(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of [x, y] pairs");
    std::vector<Eigen::Vector2d> out;
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        throw ConfigError(field(key) + ": expected an array of [x, y] pairs");
      }
      out.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return out;
  }

  nlohmann::json object(const char* key) {
    if (!mark(key)) return nlohmann::json::object();
    const auto& v = j_.at(key);
    if (!v.is_object()) throw ConfigError(field(key) + ": expected a JSON object");
    return v;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (seen_.find(item.key()) == seen_.end()) {
        throw ConfigError(path_ + ": unknown field \"" + item.key() + "\"");
      }
    }
  }

 private:
  bool mark(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string field(const char* key) const { return path_ + "." + key; }
  std::vector<double> number_list_of(const char* key, size_t len) {
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != len) {
      throw ConfigError(field(key) + ": expected an array of " + std::to_string(len) +
                        " numbers");
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field(key) + ": expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  nlohmann::json j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline PlanarNavConfig parse_planar(const nlohmann::json& j) {
  PlanarNavConfig c;
  FieldReader r(j, "planar_nav");
  c.room_min_x = r.number("room_min_x", c.room_min_x);
  c.room_max_x = r.number("room_max_x", c.room_max_x);
  c.room_min_y = r.number("room_min_y", c.room_min_y);
  c.room_max_y = r.number("room_max_y", c.room_max_y);
  c.corner_radius = r.number("corner_radius", c.corner_radius);
  c.start = r.vec2("start", c.start);
  c.target = r.vec2("target", c.target);
  c.start_var_x = r.number("start_var_x", c.start_var_x);
  c.start_var_y = r.number("start_var_y", c.start_var_y);
  c.obstacles = r.vec2_list("obstacles", c.obstacles);
  c.obstacle_weight = r.number("obstacle_weight", c.obstacle_weight);
  c.obstacle_radius = r.number("obstacle_radius", c.obstacle_radius);
  c.process_noise = r.number("process_noise", c.process_noise);
  c.obs_noise_var = r.number("obs_noise_var", c.obs_noise_var);
  c.action_cost = r.number("action_cost", c.action_cost);
  c.terminal_weight = r.number("terminal_weight", c.terminal_weight);
  c.tau = r.number("tau", c.tau);
  c.horizon = r.integer("horizon", c.horizon);
  r.finish();
  return c;
}

inline HandEyeConfig parse_hand_eye(const nlohmann::json& j) {
  HandEyeConfig c;
  FieldReader r(j, "hand_eye");
  c.eta = r.number("eta", c.eta);
  c.obs_action_weight = r.number("obs_action_weight", c.obs_action_weight);
  c.eye0 = r.vec2("eye0", c.eye0);
  c.hand1_0 = r.vec2("hand1_0", c.hand1_0);
  c.hand2_0 = r.vec2("hand2_0", c.hand2_0);
  c.target0 = r.vec2("target0", c.target0);
  std::vector<Eigen::Vector2d> obs(c.obstacles0.begin(), c.obstacles0.end());
  obs = r.vec2_list("obstacles0", obs);
  if (obs.size() != 4) throw ConfigError("hand_eye.obstacles0: expected exactly 4 positions");
  std::copy(obs.begin(), obs.end(), c.obstacles0.begin());
  c.hand_var0 = r.number("hand_var0", c.hand_var0);
  c.target_var0 = r.number("target_var0", c.target_var0);
  c.obstacle_var0 = r.number("obstacle_var0", c.obstacle_var0);
  c.process_noise_hands = r.number("process_noise_hands", c.process_noise_hands);
  c.terminal_weight = r.number("terminal_weight", c.terminal_weight);
  c.obstacle_weight = r.number("obstacle_weight", c.obstacle_weight);
  c.obstacle_rho = r.number("obstacle_rho", c.obstacle_rho);
  c.action_cost_hands = r.number("action_cost_hands", c.action_cost_hands);
  c.action_cost_eye = r.number("action_cost_eye", c.action_cost_eye);
  c.tau = r.number("tau", c.tau);
  c.horizon = r.integer("horizon", c.horizon);
  r.finish();
  return c;
}

inline nlohmann::json json_vec2(const Eigen::Vector2d& v) {
  return nlohmann::json::array({v.x(), v.y()});
}

inline nlohmann::json json_vector(const Vector& v) {
  auto a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::json json_matrix(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(json_vector(m.row(i)));
  return rows;
}

inline Vector vector_from_json(const nlohmann::json& a, const std::string& what) {
  if (!a.is_array()) throw ConfigError(what + ": expected an array");
  Vector v(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ConfigError(what + ": expected numbers");
    v[static_cast<int>(i)] = a[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const nlohmann::json& a, const std::string& what) {
  if (!a.is_array() || a.empty()) throw ConfigError(what + ": expected an array of rows");
  Matrix m(a.size(), a[0].size());
  for (size_t i = 0; i < a.size(); ++i) {
    const Vector row = vector_from_json(a[i], what);
    if (row.size() != m.cols()) throw ConfigError(what + ": ragged rows");
    m.row(static_cast<int>(i)) = row;
  }
  return m;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << content;
  f.flush();
  if (!f.good()) throw IoError("failed to write " + p.string());
}

inline void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
  write_text_file(p, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f.good()) throw ConfigError("missing file: " + p.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  detail::FieldReader r(j, "config");
  RunConfig c;
  const int version = r.integer("schema_version", kSchemaVersion);
  if (version != kSchemaVersion) {
    throw ConfigError("config.schema_version: unsupported version " + std::to_string(version));
  }
  c.domain = r.str("domain", "");
  if (c.domain != "planar_nav" && c.domain != "hand_eye" && c.domain != "lqg") {
    throw ConfigError("config.domain: expected one of planar_nav, hand_eye, lqg");
  }
  c.planar = detail::parse_planar(r.object("planar_nav"));
  c.hand_eye = detail::parse_hand_eye(r.object("hand_eye"));
  {
    detail::FieldReader lr(r.object("lqg"), "lqg");
    c.lqg.n = lr.integer("n", c.lqg.n);
    c.lqg.m = lr.integer("m", c.lqg.m);
    c.lqg.seed = lr.uinteger("seed", c.lqg.seed);
    c.lqg.horizon = lr.integer("horizon", c.lqg.horizon);
    lr.finish();
  }
  {
    detail::FieldReader sr(r.object("solver"), "solver");
    SolverConfig& s = c.solver;
    s.second_order_dynamics = (c.domain == "hand_eye");
    s.max_iterations = sr.integer("max_iterations", s.max_iterations);
    s.convergence_tol = sr.number("convergence_tol", s.convergence_tol);
    s.converged_iterations = sr.integer("converged_iterations", s.converged_iterations);
    s.reg_init = sr.number("reg_init", s.reg_init);
    s.reg_min = sr.number("reg_min", s.reg_min);
    s.reg_max = sr.number("reg_max", s.reg_max);
    s.reg_increase = sr.number("reg_increase", s.reg_increase);
    s.reg_decrease = sr.number("reg_decrease", s.reg_decrease);
    s.line_search_floor = sr.number("line_search_floor", s.line_search_floor);
    s.fd_step = sr.number("fd_step", s.fd_step);
    s.fd_step_hessian = sr.number("fd_step_hessian", s.fd_step_hessian);
    s.second_order_dynamics = sr.boolean("second_order_dynamics", s.second_order_dynamics);
    sr.finish();
  }
  // Cold-starting the sharpest fovea stalls; hand_eye defaults to the coarse
  // to fine eta continuation.
  const std::vector<double> default_schedule =
      c.domain == "hand_eye" ? std::vector<double>{10.0, 1.0, 0.3, 0.05} : std::vector<double>{};
  c.schedule = r.number_list("schedule", default_schedule);
  for (double v : c.schedule) {
    if (!(v > 0.0)) throw ConfigError("config.schedule: values must be positive");
  }
  if (!c.schedule.empty() && c.domain != "hand_eye") {
    throw ConfigError("config.schedule: shaping schedule is only defined for hand_eye (eta)");
  }
  {
    detail::FieldReader rr(r.object("rollout"), "rollout");
    RolloutRunConfig& ro = c.rollout;
    ro.seeds = rr.integer("seeds", ro.seeds);
    ro.seed_base = rr.uinteger("seed_base", ro.seed_base);
    ro.sample_initial_state = rr.boolean("sample_initial_state", ro.sample_initial_state);
    ro.noise_free = rr.boolean("noise_free", ro.noise_free);
    ro.obstacle_shift = rr.number_list("obstacle_shift", {});
    ro.solve_dir = rr.str("solve_dir", "");
    rr.finish();
    if (ro.seeds < 1) throw ConfigError("rollout.seeds: must be at least 1");
    if (!ro.obstacle_shift.empty()) {
      if (c.domain != "hand_eye") {
        throw ConfigError("rollout.obstacle_shift: only defined for hand_eye");
      }
      if (ro.obstacle_shift.size() != 8) {
        throw ConfigError("rollout.obstacle_shift: expected 8 numbers (dx, dy per obstacle)");
      }
    }
  }
  c.output_dir = r.str("output_dir", "");
  r.finish();
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  try {
    return parse_config(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    // Byte offsets are awkward to act on; report the line as well.
    size_t line = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError("config parse error at line " + std::to_string(line) + ": " + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f.good()) throw ConfigError("cannot open config file: " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

/// The configuration with every default made explicit. Re-running from this
/// JSON reproduces the run; the output directory is a runtime concern and is
/// deliberately not part of it.
inline nlohmann::json effective_config(const RunConfig& c) {
  using detail::json_vec2;
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["domain"] = c.domain;
  auto& p = j["planar_nav"];
  p["room_min_x"] = c.planar.room_min_x;
  p["room_max_x"] = c.planar.room_max_x;
  p["room_min_y"] = c.planar.room_min_y;
  p["room_max_y"] = c.planar.room_max_y;
  p["corner_radius"] = c.planar.corner_radius;
  p["start"] = json_vec2(c.planar.start);
  p["target"] = json_vec2(c.planar.target);
  p["start_var_x"] = c.planar.start_var_x;
  p["start_var_y"] = c.planar.start_var_y;
  p["obstacles"] = nlohmann::json::array();
  for (const auto& o : c.planar.obstacles) p["obstacles"].push_back(json_vec2(o));
  p["obstacle_weight"] = c.planar.obstacle_weight;
  p["obstacle_radius"] = c.planar.obstacle_radius;
  p["process_noise"] = c.planar.process_noise;
  p["obs_noise_var"] = c.planar.obs_noise_var;
  p["action_cost"] = c.planar.action_cost;
  p["terminal_weight"] = c.planar.terminal_weight;
  p["tau"] = c.planar.tau;
  p["horizon"] = c.planar.horizon;
  auto& h = j["hand_eye"];
  h["eta"] = c.hand_eye.eta;
  h["obs_action_weight"] = c.hand_eye.obs_action_weight;
  h["eye0"] = json_vec2(c.hand_eye.eye0);
  h["hand1_0"] = json_vec2(c.hand_eye.hand1_0);
  h["hand2_0"] = json_vec2(c.hand_eye.hand2_0);
  h["target0"] = json_vec2(c.hand_eye.target0);
  h["obstacles0"] = nlohmann::json::array();
  for (const auto& o : c.hand_eye.obstacles0) h["obstacles0"].push_back(json_vec2(o));
  h["hand_var0"] = c.hand_eye.hand_var0;
  h["target_var0"] = c.hand_eye.target_var0;
  h["obstacle_var0"] = c.hand_eye.obstacle_var0;
  h["process_noise_hands"] = c.hand_eye.process_noise_hands;
  h["terminal_weight"] = c.hand_eye.terminal_weight;
  h["obstacle_weight"] = c.hand_eye.obstacle_weight;
  h["obstacle_rho"] = c.hand_eye.obstacle_rho;
  h["action_cost_hands"] = c.hand_eye.action_cost_hands;
  h["action_cost_eye"] = c.hand_eye.action_cost_eye;
  h["tau"] = c.hand_eye.tau;
  h["horizon"] = c.hand_eye.horizon;
  auto& l = j["lqg"];
  l["n"] = c.lqg.n;
  l["m"] = c.lqg.m;
  l["seed"] = c.lqg.seed;
  l["horizon"] = c.lqg.horizon;
  auto& s = j["solver"];
  s["max_iterations"] = c.solver.max_iterations;
  s["convergence_tol"] = c.solver.convergence_tol;
  s["converged_iterations"] = c.solver.converged_iterations;
  s["reg_init"] = c.solver.reg_init;
  s["reg_min"] = c.solver.reg_min;
  s["reg_max"] = c.solver.reg_max;
  s["reg_increase"] = c.solver.reg_increase;
  s["reg_decrease"] = c.solver.reg_decrease;
  s["line_search_floor"] = c.solver.line_search_floor;
  s["fd_step"] = c.solver.fd_step;
  s["fd_step_hessian"] = c.solver.fd_step_hessian;
  s["second_order_dynamics"] = c.solver.second_order_dynamics;
  j["schedule"] = c.schedule;
  auto& ro = j["rollout"];
  ro["seeds"] = c.rollout.seeds;
  ro["seed_base"] = c.rollout.seed_base;
  ro["sample_initial_state"] = c.rollout.sample_initial_state;
  ro["noise_free"] = c.rollout.noise_free;
  ro["obstacle_shift"] = c.rollout.obstacle_shift;
  ro["solve_dir"] = c.rollout.solve_dir;
  return j;
}

/// Builds the domain the config describes. For hand_eye with a shaping
/// schedule, `shaping_value` selects the stage (defaults to the final one).
inline DomainSpec build_domain(const RunConfig& c, std::optional<double> shaping_value = {}) {
  if (c.domain == "planar_nav") return make_planar_nav(c.planar);
  if (c.domain == "hand_eye") {
    HandEyeConfig cfg = c.hand_eye;
    if (shaping_value) {
      cfg.eta = *shaping_value;
    } else if (!c.schedule.empty()) {
      cfg.eta = c.schedule.back();
    }
    return make_hand_eye(cfg);
  }
  LqgParams p = make_lqg_params(c.lqg.n, c.lqg.m, c.lqg.seed);
  p.horizon = c.lqg.horizon;
  return make_lqg_test(p);
}

namespace detail {

struct NominalDump {
  nlohmann::json means = nlohmann::json::array();
  nlohmann::json cov_diagonals = nlohmann::json::array();
  nlohmann::json weights = nlohmann::json::array();
  bool constrained = false;
};

inline NominalDump dump_nominal(const std::vector<Vector>& states, const BeliefLayout& layout) {
  NominalDump out;
  out.constrained = layout.constrained;
  for (const Vector& x : states) {
    const Belief b = devectorize(x, layout);
    if (const auto* g = std::get_if<GaussianBelief>(&b)) {
      out.means.push_back(json_vector(g->mean));
      out.cov_diagonals.push_back(json_vector(g->cov.diagonal()));
    } else {
      const auto& cb = std::get<ConstrainedBelief>(b);
      const GaussianBelief merged = reduce_pair(cb.free, cb.surface, cb.weight);
      out.means.push_back(json_vector(merged.mean));
      out.cov_diagonals.push_back(json_vector(merged.cov.diagonal()));
      out.weights.push_back(cb.weight);
    }
  }
  return out;
}

inline std::string nominal_csv(const std::vector<Vector>& states) {
  std::string csv = "t";
  const int dim = static_cast<int>(states.front().size());
  for (int i = 0; i < dim; ++i) csv += ",x" + std::to_string(i);
  csv += "\n";
  for (size_t t = 0; t < states.size(); ++t) {
    csv += std::to_string(t);
    for (int i = 0; i < dim; ++i) csv += "," + format_double(states[t][i]);
    csv += "\n";
  }
  return csv;
}

}  // namespace detail

/// Runs the (possibly continuation) solve and writes config_effective.json,
/// solve_report.json, nominal_trajectory.csv and policy.json into `out`.
/// Non-convergence is not an error; it is recorded in the report.
inline DdpResult run_solve(const RunConfig& c, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());

  detail::write_json_file(out / "config_effective.json", effective_config(c));

  std::vector<double> schedule = c.schedule;
  if (schedule.empty()) schedule.push_back(c.domain == "hand_eye" ? c.hand_eye.eta : 0.0);

  const DdpOptions opt = c.solver.to_options();
  DomainSpec domain = build_domain(c, schedule.front());
  Vector x0 = vectorize(domain.initial_belief, domain.layout);
  std::vector<Vector> actions(domain.horizon);
  for (int i = 0; i < domain.horizon; ++i) {
    actions[i] = domain.initial_action ? domain.initial_action(i)
                                       : Vector::Zero(domain.action_dim);
  }

  nlohmann::json stage_reports = nlohmann::json::array();
  DdpResult res;
  double total_wall = 0.0;
  for (size_t k = 0; k < schedule.size(); ++k) {
    if (k > 0) domain = build_domain(c, schedule[k]);
    const BeliefMdp mdp = make_belief_mdp(domain, opt.fd_step, opt.fd_step_hessian);
    const auto t0 = std::chrono::steady_clock::now();
    res = solve(mdp, x0, actions, opt);
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0).count();
    total_wall += wall;
    actions = res.actions;

    nlohmann::json sr;
    sr["shaping_value"] = c.schedule.empty() ? nlohmann::json() : nlohmann::json(schedule[k]);
    sr["converged"] = res.converged;
    sr["iterations"] = res.iterations;
    sr["total_reward"] = res.total_reward;
    sr["reward_log"] = res.reward_log;
    sr["grad_norm"] = res.grad_norm;
    sr["final_regularization"] = res.final_regularization;
    sr["wall_time_s"] = wall;
    stage_reports.push_back(std::move(sr));
  }

  nlohmann::json report;
  report["schema_version"] = kSchemaVersion;
  report["domain"] = domain.name;
  report["state_dim"] = domain.layout.state_dim;
  report["belief_dim"] = domain.layout.dim();
  report["action_dim"] = domain.action_dim;
  report["horizon"] = domain.horizon;
  report["converged"] = res.converged;
  report["total_reward"] = res.total_reward;
  report["grad_norm"] = res.grad_norm;
  report["stages"] = std::move(stage_reports);
  report["wall_time_s"] = total_wall;
  const detail::NominalDump nom = detail::dump_nominal(res.states, domain.layout);
  report["nominal"]["means"] = nom.means;
  report["nominal"]["cov_diagonals"] = nom.cov_diagonals;
  if (nom.constrained) report["nominal"]["weights"] = nom.weights;
  nlohmann::json acts = nlohmann::json::array();
  for (const Vector& a : res.actions) acts.push_back(detail::json_vector(a));
  report["nominal"]["actions"] = std::move(acts);
  detail::write_json_file(out / "solve_report.json", report);

  detail::write_text_file(out / "nominal_trajectory.csv", detail::nominal_csv(res.states));

  nlohmann::json policy;
  policy["schema_version"] = kSchemaVersion;
  policy["domain"] = domain.name;
  policy["belief_dim"] = domain.layout.dim();
  policy["action_dim"] = domain.action_dim;
  policy["horizon"] = domain.horizon;
  nlohmann::json xs = nlohmann::json::array();
  for (const Vector& x : res.states) xs.push_back(detail::json_vector(x));
  policy["nominal_states"] = std::move(xs);
  nlohmann::json as = nlohmann::json::array();
  for (const Vector& a : res.actions) as.push_back(detail::json_vector(a));
  policy["actions"] = std::move(as);
  nlohmann::json gains = nlohmann::json::array();
  for (const Matrix& g : res.gains) gains.push_back(detail::json_matrix(g));
  policy["gains"] = std::move(gains);
  detail::write_json_file(out / "policy.json", policy);
  return res;
}

inline LinearPolicy load_policy(const std::filesystem::path& solve_dir, const DomainSpec& domain) {
  const auto path = solve_dir / "policy.json";
  if (!std::filesystem::exists(path)) {
    throw ConfigError("no prior solve found: missing " + path.string());
  }
  const nlohmann::json j = detail::read_json_file(path);
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError(path.string() + ": unsupported schema version");
  }
  if (j["domain"].get<std::string>() != domain.name) {
    throw ConfigError(path.string() + ": policy was solved for domain \"" +
                      j["domain"].get<std::string>() + "\"");
  }
  LinearPolicy p;
  for (const auto& x : j.at("nominal_states")) {
    p.nominal_states.push_back(detail::vector_from_json(x, "policy.nominal_states"));
  }
  for (const auto& a : j.at("actions")) {
    p.nominal_actions.push_back(detail::vector_from_json(a, "policy.actions"));
  }
  for (const auto& g : j.at("gains")) {
    p.gains.push_back(detail::matrix_from_json(g, "policy.gains"));
  }
  if (p.nominal_states.size() != p.nominal_actions.size() + 1 ||
      p.gains.size() != p.nominal_actions.size()) {
    throw ConfigError(path.string() + ": inconsistent trajectory lengths");
  }
  return p;
}

/// Runs seeded closed-loop rollouts against a previously solved policy and
/// writes rollout_seed<k>.json per seed plus rollouts_aggregate.csv.
inline std::vector<RolloutRecord> run_rollout(const RunConfig& c,
                                              const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());

  const DomainSpec domain = build_domain(c);
  const fs::path solve_dir = c.rollout.solve_dir.empty() ? out : fs::path(c.rollout.solve_dir);
  const LinearPolicy policy = load_policy(solve_dir, domain);
  if (policy.horizon() != domain.horizon) {
    throw ConfigError("policy horizon does not match the configured domain");
  }

  RolloutOptions ropt;
  ropt.sample_initial_state = c.rollout.sample_initial_state;
  ropt.noise_free = c.rollout.noise_free;
  if (!c.rollout.obstacle_shift.empty()) {
    Vector s0 = domain.initial_state;
    for (int i = 0; i < 8; ++i) {
      s0[hand_eye::kObstacles + i] += c.rollout.obstacle_shift[i];
    }
    ropt.initial_state = s0;
  }

  const int n = domain.layout.state_dim;
  std::vector<RolloutRecord> records;
  std::vector<std::map<std::string, double>> metric_rows;
  std::vector<double> deviations;
  for (int k = 0; k < c.rollout.seeds; ++k) {
    const std::uint64_t seed = c.rollout.seed_base + static_cast<std::uint64_t>(k);
    RolloutRecord rec = rollout(domain, policy, seed, ropt);

    double dev = 0.0;
    for (size_t t = 0; t < rec.states.size(); ++t) {
      dev = std::max(dev, (rec.states[t] - policy.nominal_states[t].head(n))
                              .lpNorm<Eigen::Infinity>());
    }
    deviations.push_back(dev);
    metric_rows.push_back(domain.metrics ? domain.metrics(rec.states, rec.actions)
                                         : std::map<std::string, double>{});

    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["domain"] = domain.name;
    j["seed"] = rec.seed;
    j["estimator_failed"] = rec.estimator_failed;
    j["steps_completed"] = rec.steps_completed;
    j["realized_reward"] = rec.realized_reward;
    j["nominal_deviation"] = dev;
    for (const auto& [key, value] : metric_rows.back()) j["metrics"][key] = value;
    auto dump_list = [](const std::vector<Vector>& vs) {
      nlohmann::json a = nlohmann::json::array();
      for (const Vector& v : vs) a.push_back(detail::json_vector(v));
      return a;
    };
    j["states"] = dump_list(rec.states);
    j["observations"] = dump_list(rec.observations);
    j["actions"] = dump_list(rec.actions);
    j["beliefs"] = dump_list(rec.beliefs);
    detail::write_json_file(out / ("rollout_seed" + std::to_string(seed) + ".json"), j);
    records.push_back(std::move(rec));
  }

  std::vector<std::string> metric_keys;
  for (const auto& [key, value] : metric_rows.front()) metric_keys.push_back(key);
  std::string csv = "seed,realized_reward,nominal_deviation";
  for (const auto& key : metric_keys) csv += "," + key;
  csv += "\n";
  for (size_t k = 0; k < records.size(); ++k) {
    csv += std::to_string(records[k].seed);
    csv += "," + detail::format_double(records[k].realized_reward);
    csv += "," + detail::format_double(deviations[k]);
    for (const auto& key : metric_keys) csv += "," + detail::format_double(metric_rows[k].at(key));
    csv += "\n";
  }
  detail::write_text_file(out / "rollouts_aggregate.csv", csv);
  return records;
}

/// Validates a config and describes the domain it builds. Writes nothing.
inline std::string run_check(const RunConfig& c) {
  const DomainSpec d = build_domain(c);
  std::string s;
  s += "domain: " + d.name + "\n";
  s += "state_dim: " + std::to_string(d.layout.state_dim) + "\n";
  s += "action_dim: " + std::to_string(d.action_dim) + "\n";
  s += "belief_dim: " + std::to_string(d.layout.dim()) + "\n";
  s += "horizon: " + std::to_string(d.horizon) + "\n";
  s += std::string("constraint: ") + (d.constraint ? "yes" : "no") + "\n";
  s += "schedule_stages: " + std::to_string(std::max<size_t>(c.schedule.size(), 1)) + "\n";
  return s;
}

}  // namespace bddp
