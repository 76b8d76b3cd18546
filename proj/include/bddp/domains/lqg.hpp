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

#include <cstdint>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bddp/belief_mdp.hpp"
#include "bddp/domain_spec.hpp"

namespace bddp {

/// One linear-Gaussian problem instance, with the matrices exposed so
/// reference recursions (Kalman, Riccati) can run on exactly the same data.
/// Discrete transition x' = A x + B a + noise, full-state observation.
struct LqgParams {
  Matrix A, B;
  Matrix Qproc;  // process-noise covariance per step
  Matrix W;      // observation-noise covariance
  Matrix Qr, R;  // running cost x'Qr x + a'R a (reward is its negative)
  Matrix Qf;     // terminal cost
  Vector x0;
  Matrix P0;
  int horizon = 50;
};

namespace detail {

inline Matrix random_spd(int n, double base, double spread, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = dist(rng);
  return base * Matrix::Identity(n, n) + spread * symmetrized(m * m.transpose()) / n;
}

}  // namespace detail

inline LqgParams make_lqg_params(int n, int m, std::uint64_t seed = 0) {
  if (n < 1 || m < 1) throw ContractError("lqg: dimensions must be at least 1");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> dist(0.0, 1.0);

  LqgParams p;
  p.A = Matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.A(i, j) = (i == j ? 1.0 : 0.0) + 0.3 * dist(rng);
  // Scale to spectral radius 0.95 so 50-step recursions stay bounded.
  const double rho = p.A.eigenvalues().cwiseAbs().maxCoeff();
  if (rho > 0.95) p.A *= 0.95 / rho;

  p.B = Matrix(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) p.B(i, j) = 0.5 * dist(rng);

  p.Qproc = detail::random_spd(n, 0.01, 0.005, rng);
  p.W = detail::random_spd(n, 0.5, 0.2, rng);
  p.Qr = detail::random_spd(n, 1.0, 0.3, rng);
  p.R = detail::random_spd(m, 0.5, 0.1, rng);
  p.Qf = detail::random_spd(n, 5.0, 1.0, rng);
  p.P0 = detail::random_spd(n, 0.4, 0.1, rng);
  p.x0 = Vector(n);
  for (int i = 0; i < n; ++i) p.x0[i] = dist(rng);
  return p;
}

inline DomainSpec make_lqg_test(const LqgParams& p) {
  const int n = static_cast<int>(p.A.rows());
  const int m = static_cast<int>(p.B.cols());

  DomainSpec d;
  d.name = "lqg";
  d.action_dim = m;
  d.horizon = p.horizon;
  d.layout = BeliefLayout::full(n);

  d.dynamics.tau = 1.0;
  const Matrix drift_mat = p.A - Matrix::Identity(n, n);
  const Matrix b_mat = p.B;
  d.dynamics.drift = [drift_mat, b_mat](const Vector& s, const Vector& a) {
    return Vector(drift_mat * s + b_mat * a);
  };
  d.dynamics.drift_jacobian = [drift_mat](const Vector&, const Vector&) { return drift_mat; };
  const Matrix g_noise = Eigen::LLT<Matrix>(p.Qproc).matrixL();
  d.dynamics.noise = [g_noise](const Vector&, const Vector&) { return g_noise; };

  d.observation.mean = [](const Vector& s) { return s; };
  d.observation.mean_jacobian = [n](const Vector&) -> Matrix {
    return Matrix::Identity(n, n);
  };
  const Matrix w_cov = p.W;
  d.observation.noise_cov = [w_cov](const Vector&, const Vector&) { return w_cov; };

  const Matrix qr = symmetrized(p.Qr);
  d.state_running_reward = [qr](const Vector& s) { return -s.dot(qr * s); };
  d.action_cost = symmetrized(p.R);
  const auto state_part = d.state_running_reward;
  const Matrix r_cost = d.action_cost;
  d.running_reward = [state_part, r_cost](const Vector& s, const Vector& a, int) {
    return state_part(s) - a.dot(r_cost * a);
  };
  const Matrix qf = symmetrized(p.Qf);
  d.terminal_reward = [qf](const Vector& s) { return -s.dot(qf * s); };

  d.initial_belief = GaussianBelief(p.x0, symmetrized(p.P0));
  d.initial_state = p.x0;
  d.initial_action = [m](int) { return Vector(Vector::Zero(m)); };
  return d;
}

inline DomainSpec make_lqg_test(int n, int m) { return make_lqg_test(make_lqg_params(n, m)); }

/// Deterministic-state LQR as a plain MDP with analytic derivatives, for
/// validating the trajectory optimizer against the Riccati recursion.
inline BeliefMdp make_lqr_mdp(const LqgParams& p) {
  const int n = static_cast<int>(p.A.rows());
  const int m = static_cast<int>(p.B.cols());

  BeliefMdp mdp;
  mdp.state_dim = n;
  mdp.action_dim = m;
  mdp.horizon = p.horizon;

  const Matrix a_mat = p.A;
  const Matrix b_mat = p.B;
  mdp.step = [a_mat, b_mat](const Vector& x, const Vector& a) {
    return Vector(a_mat * x + b_mat * a);
  };
  mdp.step_derivatives = [a_mat, b_mat](const Vector&, const Vector&) {
    return StepDerivatives{a_mat, b_mat};
  };

  const Matrix q2 = p.Qr + p.Qr.transpose();
  const Matrix r2 = p.R + p.R.transpose();
  mdp.reward = [q2, r2](const Vector& x, const Vector& a, int) {
    return -0.5 * (x.dot(q2 * x) + a.dot(r2 * a));
  };
  mdp.reward_derivatives = [q2, r2, n, m](const Vector& x, const Vector& a, int) {
    StageDerivatives d;
    d.rx = -q2 * x;
    d.ru = -r2 * a;
    d.rxx = -q2;
    d.ruu = -r2;
    d.rux = Matrix::Zero(m, n);
    return d;
  };
  const Matrix qf2 = p.Qf + p.Qf.transpose();
  mdp.terminal_reward = [qf2](const Vector& x) { return -0.5 * x.dot(qf2 * x); };
  mdp.terminal_derivatives = [qf2](const Vector& x) {
    return TerminalDerivatives{-qf2 * x, -qf2};
  };
  return mdp;
}

}  // namespace bddp
