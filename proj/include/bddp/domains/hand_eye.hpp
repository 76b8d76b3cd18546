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

#include <array>
#include <cmath>
#include <limits>

#include "bddp/domain_spec.hpp"

namespace bddp {

/// Two hands reaching for a target among obstacles, with a movable gaze
/// point. Every object position is observed, but the observation noise is
/// small only near the gaze (foveated vision): looking at an object is the
/// only way to localize it. State packs 8 planar positions in the order
/// eye, hand1, hand2, target, obstacle1..4; actions are the hand and eye
/// velocities [hand1, hand2, eye].
struct HandEyeConfig {
  double eta = 0.05;  // fovea radius parameter; noise = 1 - exp(-d^2 / 2 eta)
  double obs_action_weight = 0.01;  // eye-velocity penalty inside the noise

  Eigen::Vector2d eye0{0.0, 0.0};
  Eigen::Vector2d hand1_0{-0.7, -0.7};
  Eigen::Vector2d hand2_0{0.7, -0.7};
  Eigen::Vector2d target0{0.0, 0.8};
  std::array<Eigen::Vector2d, 4> obstacles0{
      Eigen::Vector2d(-0.45, 0.05), Eigen::Vector2d(0.45, 0.05),
      Eigen::Vector2d(-0.15, 0.30), Eigen::Vector2d(0.15, 0.30)};

  double hand_var0 = 0.005;
  double target_var0 = 0.05;
  double obstacle_var0 = 0.05;

  double process_noise_hands = 0.04;
  double terminal_weight = 100.0;
  double obstacle_weight = 10.0;
  double obstacle_rho = 0.15;
  double action_cost_hands = 0.05;
  double action_cost_eye = 1e-4;
  double tau = 1.0;
  int horizon = 40;
};

namespace hand_eye {

inline constexpr int kStateDim = 16;
inline constexpr int kActionDim = 6;
inline constexpr int kNumObjects = 8;  // eye, two hands, target, four obstacles
inline constexpr int kEye = 0;
inline constexpr int kHand1 = 2;
inline constexpr int kHand2 = 4;
inline constexpr int kTarget = 6;
inline constexpr int kObstacles = 8;

inline Eigen::Vector2d object(const Vector& s, int offset) {
  return s.segment<2>(offset);
}

}  // namespace hand_eye

inline DomainSpec make_hand_eye(const HandEyeConfig& cfg) {
  using namespace hand_eye;
  if (!(cfg.eta > 0.0)) throw ContractError("hand eye: eta must be positive");
  if (!(cfg.tau > 0.0)) throw ContractError("hand eye: non-positive timestep");
  if (cfg.horizon < 2) throw ContractError("hand eye: horizon below 2");

  DomainSpec d;
  d.name = "hand_eye";
  d.action_dim = kActionDim;
  d.horizon = cfg.horizon;
  // 16 means plus one shared variance per uncertain object: 23 coordinates.
  // The eye's coordinates sit in no group, pinning its variance at zero.
  d.layout = BeliefLayout::grouped_diagonal(
      kStateDim, {{2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}, {12, 13}, {14, 15}});

  d.dynamics.tau = cfg.tau;
  d.dynamics.drift = [](const Vector&, const Vector& a) {
    Vector f = Vector::Zero(kStateDim);
    f.segment<2>(kEye) = a.segment<2>(4);
    f.segment<4>(kHand1) = a.segment<4>(0);
    return f;
  };
  d.dynamics.drift_jacobian = [](const Vector&, const Vector&) {
    return Matrix::Zero(kStateDim, kStateDim);
  };
  Matrix g_noise = Matrix::Zero(kStateDim, 4);
  g_noise.block<4, 4>(kHand1, 0) = cfg.process_noise_hands * Matrix::Identity(4, 4);
  d.dynamics.noise = [g_noise](const Vector&, const Vector&) { return g_noise; };

  d.observation.mean = [](const Vector& s) { return s; };
  d.observation.mean_jacobian = [](const Vector&) -> Matrix {
    return Matrix::Identity(kStateDim, kStateDim);
  };
  const double inv_two_eta = 0.5 / cfg.eta;
  const double caw = cfg.obs_action_weight;
  d.observation.noise_cov = [inv_two_eta, caw](const Vector& s, const Vector& a) {
    const Eigen::Vector2d eye = object(s, kEye);
    const double eye_term = caw * a.segment<2>(4).squaredNorm();
    Matrix w = Matrix::Zero(kStateDim, kStateDim);
    for (int obj = 0; obj < kNumObjects; ++obj) {
      const double d2 = (object(s, 2 * obj) - eye).squaredNorm();
      const double wi = 1.0 - std::exp(-d2 * inv_two_eta) + eye_term;
      w(2 * obj, 2 * obj) = wi;
      w(2 * obj + 1, 2 * obj + 1) = wi;
    }
    return w;
  };

  const double ow = cfg.obstacle_weight;
  const double inv2rho2 = 0.5 / (cfg.obstacle_rho * cfg.obstacle_rho);
  d.state_running_reward = [ow, inv2rho2](const Vector& s) {
    double r = 0.0;
    for (int hand : {kHand1, kHand2}) {
      const Eigen::Vector2d h = object(s, hand);
      for (int k = 0; k < 4; ++k) {
        const double d2 = (h - object(s, kObstacles + 2 * k)).squaredNorm();
        r -= ow * std::exp(-d2 * inv2rho2);
      }
    }
    return r;
  };
  Vector action_cost_diag(kActionDim);
  action_cost_diag << cfg.action_cost_hands, cfg.action_cost_hands, cfg.action_cost_hands,
      cfg.action_cost_hands, cfg.action_cost_eye, cfg.action_cost_eye;
  d.action_cost = action_cost_diag.asDiagonal();
  const auto state_part = d.state_running_reward;
  const Matrix r_cost = d.action_cost;
  d.running_reward = [state_part, r_cost](const Vector& s, const Vector& a, int) {
    return state_part(s) - a.dot(r_cost * a);
  };
  const double tw = cfg.terminal_weight;
  d.terminal_reward = [tw](const Vector& s) {
    const Eigen::Vector2d t = object(s, kTarget);
    return -tw * ((object(s, kHand1) - t).squaredNorm() +
                  (object(s, kHand2) - t).squaredNorm());
  };

  Vector mean(kStateDim);
  mean << cfg.eye0, cfg.hand1_0, cfg.hand2_0, cfg.target0, cfg.obstacles0[0],
      cfg.obstacles0[1], cfg.obstacles0[2], cfg.obstacles0[3];
  Vector var = Vector::Zero(kStateDim);
  var.segment<4>(kHand1).setConstant(cfg.hand_var0);
  var.segment<2>(kTarget).setConstant(cfg.target_var0);
  var.segment<8>(kObstacles).setConstant(cfg.obstacle_var0);
  d.initial_belief = GaussianBelief(mean, var.asDiagonal());
  d.initial_state = mean;
  d.initial_action = [](int) { return Vector(Vector::Zero(kActionDim)); };

  // Clearance and terminal error read object positions out of the realized
  // states, so metrics stay meaningful when the true scene differs from the
  // believed one.
  d.metrics = [](const std::vector<Vector>& states, const std::vector<Vector>&) {
    std::map<std::string, double> m;
    const Vector& last = states.back();
    const Eigen::Vector2d t = object(last, kTarget);
    m["terminal_error"] = 0.5 * ((object(last, kHand1) - t).norm() +
                                 (object(last, kHand2) - t).norm());
    double clearance = std::numeric_limits<double>::infinity();
    for (const Vector& s : states) {
      for (int hand : {kHand1, kHand2}) {
        for (int k = 0; k < 4; ++k) {
          clearance = std::min(
              clearance, (object(s, hand) - object(s, kObstacles + 2 * k)).norm());
        }
      }
    }
    m["min_obstacle_clearance"] = clearance;
    return m;
  };
  return d;
}

inline DomainSpec make_hand_eye(double eta) {
  HandEyeConfig cfg;
  cfg.eta = eta;
  return make_hand_eye(cfg);
}

}  // namespace bddp
