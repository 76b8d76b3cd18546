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

#include <cmath>
#include <limits>
#include <vector>

#include "bddp/constrained.hpp"
#include "bddp/domain_spec.hpp"

namespace bddp {

/// Point robot in a closed room. Position is the full state, actions are
/// velocities, observations are position readings that stay uninformative by
/// default; the only reliable information source is contact with the room
/// boundary, which the constrained belief update turns into localization.
struct PlanarNavConfig {
  // Room interior: axis-aligned rectangle, corners rounded inward by
  // corner_radius (0 keeps them sharp).
  double room_min_x = 0.0;
  double room_max_x = 10.0;
  double room_min_y = 0.0;
  double room_max_y = 6.0;
  double corner_radius = 0.0;

  Eigen::Vector2d start{2.0, 2.0};
  Eigen::Vector2d target{8.0, 3.0};
  double start_var_x = 0.01;
  double start_var_y = 0.36;

  std::vector<Eigen::Vector2d> obstacles{Eigen::Vector2d(5.0, 2.8)};
  double obstacle_weight = 10.0;
  double obstacle_radius = 0.4;

  double process_noise = 0.1;    // g = process_noise * I, so Q = tau * pn^2 * I
  double obs_noise_var = 25.0;   // W away from walls
  double action_cost = 0.01;
  double terminal_weight = 50.0;
  double tau = 1.0;
  int horizon = 40;
};

namespace detail {

struct RoomGeometry {
  double cx, cy;    // center
  double bx, by;    // half extents
  double r;         // corner radius
};

inline RoomGeometry room_geometry(const PlanarNavConfig& cfg) {
  RoomGeometry g;
  g.cx = 0.5 * (cfg.room_min_x + cfg.room_max_x);
  g.cy = 0.5 * (cfg.room_min_y + cfg.room_max_y);
  g.bx = 0.5 * (cfg.room_max_x - cfg.room_min_x);
  g.by = 0.5 * (cfg.room_max_y - cfg.room_min_y);
  g.r = cfg.corner_radius;
  if (!(g.bx > 0.0) || !(g.by > 0.0) || g.r < 0.0 || g.r >= std::min(g.bx, g.by)) {
    throw ContractError("planar nav: degenerate room geometry");
  }
  return g;
}

// Distance to the room boundary, positive inside. Exact Euclidean distance
// for the rounded-rectangle interior, including around the corner arcs.
inline double room_distance(const RoomGeometry& g, const Vector& p) {
  const double qx = std::abs(p[0] - g.cx) - (g.bx - g.r);
  const double qy = std::abs(p[1] - g.cy) - (g.by - g.r);
  if (qx > 0.0 || qy > 0.0) {
    return g.r - std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
  }
  return g.r - std::max(qx, qy);
}

// Unit inward normal of the level sets of room_distance. Never vanishes; on
// the measure-zero interior ridge the x branch wins the tie.
inline Vector room_gradient(const RoomGeometry& g, const Vector& p) {
  const double dx = p[0] - g.cx;
  const double dy = p[1] - g.cy;
  const double qx = std::abs(dx) - (g.bx - g.r);
  const double qy = std::abs(dy) - (g.by - g.r);
  const double sx = dx >= 0.0 ? 1.0 : -1.0;
  const double sy = dy >= 0.0 ? 1.0 : -1.0;
  Vector grad(2);
  if (qx > 0.0 || qy > 0.0) {
    const double vx = std::max(qx, 0.0);
    const double vy = std::max(qy, 0.0);
    const double norm = std::hypot(vx, vy);
    grad << -sx * vx / norm, -sy * vy / norm;
  } else if (qx >= qy) {
    grad << -sx, 0.0;
  } else {
    grad << 0.0, -sy;
  }
  return grad;
}

}  // namespace detail

inline DomainSpec make_planar_nav(const PlanarNavConfig& cfg = {}) {
  const detail::RoomGeometry room = detail::room_geometry(cfg);
  if (cfg.horizon < 2) throw ContractError("planar nav: horizon below 2");
  if (!(cfg.tau > 0.0)) throw ContractError("planar nav: non-positive timestep");

  DomainSpec d;
  d.name = "planar_nav";
  d.action_dim = 2;
  d.horizon = cfg.horizon;
  d.layout = BeliefLayout::full(2, /*constrained=*/true);

  d.dynamics.drift = [](const Vector&, const Vector& a) { return a; };
  d.dynamics.drift_jacobian = [](const Vector&, const Vector&) { return Matrix::Zero(2, 2); };
  const Matrix g_noise = cfg.process_noise * Matrix::Identity(2, 2);
  d.dynamics.noise = [g_noise](const Vector&, const Vector&) { return g_noise; };
  d.dynamics.tau = cfg.tau;

  d.observation.mean = [](const Vector& s) { return s; };
  d.observation.mean_jacobian = [](const Vector&) -> Matrix { return Matrix::Identity(2, 2); };
  const Matrix w_cov = cfg.obs_noise_var * Matrix::Identity(2, 2);
  d.observation.noise_cov = [w_cov](const Vector&, const Vector&) { return w_cov; };

  ConstraintModel cm;
  cm.distance = [room](const Vector& s) { return detail::room_distance(room, s); };
  cm.gradient = [room](const Vector& s) { return detail::room_gradient(room, s); };
  d.constraint = cm;

  std::vector<Vector> obstacles;
  obstacles.reserve(cfg.obstacles.size());
  for (const auto& o : cfg.obstacles) obstacles.push_back(Vector(o));
  const double ow = cfg.obstacle_weight;
  const double inv2rho2 = 0.5 / (cfg.obstacle_radius * cfg.obstacle_radius);
  d.state_running_reward = [obstacles, ow, inv2rho2](const Vector& s) {
    double r = 0.0;
    for (const auto& o : obstacles) {
      r -= ow * std::exp(-(s - o).squaredNorm() * inv2rho2);
    }
    return r;
  };
  d.action_cost = cfg.action_cost * Matrix::Identity(2, 2);
  const auto state_part = d.state_running_reward;
  const Matrix r_cost = d.action_cost;
  d.running_reward = [state_part, r_cost](const Vector& s, const Vector& a, int) {
    return state_part(s) - a.dot(r_cost * a);
  };
  const Vector target = cfg.target;
  const double tw = cfg.terminal_weight;
  d.terminal_reward = [target, tw](const Vector& s) {
    return -tw * (s - target).squaredNorm();
  };

  const Vector start = cfg.start;
  Matrix start_cov = Matrix::Zero(2, 2);
  start_cov(0, 0) = cfg.start_var_x;
  start_cov(1, 1) = cfg.start_var_y;
  d.initial_belief = ConstrainedBelief{
      GaussianBelief(start, start_cov),
      project_to_manifold(GaussianBelief::dirac(start), cm), 1.0};
  d.initial_state = start;

  const int horizon = cfg.horizon;
  const double tau = cfg.tau;
  d.initial_action = [start, target, horizon, tau](int) {
    return Vector((target - start) / (horizon * tau));
  };

  d.metrics = [obstacles, target](const std::vector<Vector>& states,
                                  const std::vector<Vector>&) {
    std::map<std::string, double> m;
    m["terminal_error"] = (states.back() - target).norm();
    if (!obstacles.empty()) {
      double clearance = std::numeric_limits<double>::infinity();
      for (const auto& s : states) {
        for (const auto& o : obstacles) {
          clearance = std::min(clearance, (s - o).norm());
        }
      }
      m["min_obstacle_clearance"] = clearance;
    }
    return m;
  };
  return d;
}

}  // namespace bddp
