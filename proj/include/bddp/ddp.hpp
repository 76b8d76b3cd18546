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

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

#include "bddp/belief_mdp.hpp"
#include "bddp/numdiff.hpp"

namespace bddp {

/// Per-iteration solver telemetry passed to DdpOptions::on_iteration.
struct DdpIterationInfo {
  int iteration = 0;
  double regularization = 0.0;
  double expected_improvement = 0.0;  // model-predicted gain of a full step
  double qu_max = 0.0;
  bool backward_ok = false;
  bool accepted = false;
  double alpha = 0.0;  // accepted step length, 0 if rejected
  double total_reward = 0.0;
};

struct DdpOptions {
  int max_iterations = 500;
  // An iteration counts toward convergence when the relative reward
  // improvement (realized or model-predicted) falls below this.
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
  // Keep the Vx-contracted dynamics Hessian in the stage quadratics (full
  // DDP). Smooth belief dynamics that shape noise through the action need
  // this curvature to make progress; Gauss-Newton alone stalls. Leave it off
  // for constrained mixtures, whose step map is only piecewise smooth and
  // yields unreliable finite-difference Hessians near the truncation onset.
  bool second_order_dynamics = false;
  std::function<void(const DdpIterationInfo&)> on_iteration;
};

/// Time-varying affine policy around a nominal trajectory:
/// a(x, i) = actions[i] + gains[i] * (x - states[i]).
struct DdpResult {
  std::vector<Vector> states;       // horizon + 1 belief vectors
  std::vector<Vector> actions;      // horizon
  std::vector<Matrix> gains;        // horizon, from the final backward pass
  std::vector<Vector> feedforward;  // horizon, residual steps at the solution
  std::vector<double> reward_log;   // total reward after each accepted pass
  double total_reward = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_regularization = 0.0;
  double grad_norm = 0.0;  // max over stages of the action-gradient inf norm
};

namespace detail {

struct StageDerivs {
  StepDerivatives f;
  StageDerivatives r;
};

struct TrajectoryDerivs {
  std::vector<StageDerivs> stage;
  TerminalDerivatives terminal;
};

inline TrajectoryDerivs trajectory_derivatives(const BeliefMdp& mdp,
                                               const std::vector<Vector>& xs,
                                               const std::vector<Vector>& as,
                                               const DdpOptions& opt) {
  const int nsteps = static_cast<int>(as.size());
  const int n = mdp.state_dim;
  const int m = mdp.action_dim;
  TrajectoryDerivs out;
  out.stage.resize(nsteps);
  for (int i = 0; i < nsteps; ++i) {
    StageDerivs& d = out.stage[i];
    if (mdp.step_derivatives) {
      d.f = mdp.step_derivatives(xs[i], as[i]);
    } else {
      d.f.fx = jacobian_fd([&](const Vector& x) { return mdp.step(x, as[i]); }, xs[i],
                           opt.fd_step);
      d.f.fu = jacobian_fd([&](const Vector& a) { return mdp.step(xs[i], a); }, as[i],
                           opt.fd_step);
      if (opt.second_order_dynamics) {
        Vector xa(n + m);
        xa << xs[i], as[i];
        d.f.f_hess = vector_hessians_fd(
            [&](const Vector& v) { return mdp.step(v.head(n), v.tail(m)); }, xa,
            opt.fd_step_hessian);
      }
    }
    if (mdp.reward_derivatives) {
      d.r = mdp.reward_derivatives(xs[i], as[i], i);
    } else {
      Vector xa(n + m);
      xa << xs[i], as[i];
      const auto joint = [&](const Vector& v) {
        return mdp.reward(v.head(n), v.tail(m), i);
      };
      const Vector g = gradient_fd(joint, xa, opt.fd_step);
      const Matrix h = hessian_fd(joint, xa, opt.fd_step_hessian);
      d.r.rx = g.head(n);
      d.r.ru = g.tail(m);
      d.r.rxx = h.topLeftCorner(n, n);
      d.r.ruu = h.bottomRightCorner(m, m);
      d.r.rux = h.bottomLeftCorner(m, n);
    }
  }
  if (mdp.terminal_derivatives) {
    out.terminal = mdp.terminal_derivatives(xs.back());
  } else {
    out.terminal.rx = gradient_fd(mdp.terminal_reward, xs.back(), opt.fd_step);
    out.terminal.rxx = hessian_fd(mdp.terminal_reward, xs.back(), opt.fd_step_hessian);
  }
  return out;
}

}  // namespace detail

struct BackwardPassResult {
  std::vector<Vector> k;
  std::vector<Matrix> K;
  // Model-predicted reward gain of a full (alpha = 1) step.
  double expected_improvement = 0.0;
  double qu_max = 0.0;
  bool ok = false;
};

/// Gauss-Newton backward sweep for reward maximization. The regularized
/// action Hessian Quu - reg * I must be negative definite at every stage;
/// otherwise the pass aborts so the caller can raise the regularization.
inline BackwardPassResult backward_pass(const detail::TrajectoryDerivs& derivs, double reg) {
  const int nsteps = static_cast<int>(derivs.stage.size());
  BackwardPassResult out;
  out.k.resize(nsteps);
  out.K.resize(nsteps);

  Vector vx = derivs.terminal.rx;
  Matrix vxx = derivs.terminal.rxx;
  double d1 = 0.0;
  double d2 = 0.0;
  for (int i = nsteps - 1; i >= 0; --i) {
    const auto& f = derivs.stage[i].f;
    const auto& r = derivs.stage[i].r;
    const int n = static_cast<int>(f.fx.cols());
    const int m = static_cast<int>(f.fu.cols());
    const Vector qx = r.rx + f.fx.transpose() * vx;
    const Vector qu = r.ru + f.fu.transpose() * vx;
    Matrix qxx = r.rxx + f.fx.transpose() * vxx * f.fx;
    Matrix quu = r.ruu + f.fu.transpose() * vxx * f.fu;
    Matrix qux = r.rux + f.fu.transpose() * vxx * f.fx;
    if (!f.f_hess.empty()) {
      Matrix contracted = Matrix::Zero(n + m, n + m);
      for (size_t j = 0; j < f.f_hess.size(); ++j) contracted += vx[j] * f.f_hess[j];
      qxx += contracted.topLeftCorner(n, n);
      quu += contracted.bottomRightCorner(m, m);
      qux += contracted.bottomLeftCorner(m, n);
    }

    // Solve against reg * I - Quu, which must be positive definite.
    const Matrix neg_quu_reg =
        reg * Matrix::Identity(m, m) - symmetrized(quu);
    const Eigen::LLT<Matrix> llt(neg_quu_reg);
    if (llt.info() != Eigen::Success) return out;

    out.k[i] = llt.solve(qu);
    out.K[i] = llt.solve(qux);
    out.qu_max = std::max(out.qu_max, qu.lpNorm<Eigen::Infinity>());
    d1 += out.k[i].dot(qu);
    d2 += 0.5 * out.k[i].dot(quu * out.k[i]);

    vx = qx + out.K[i].transpose() * (quu * out.k[i] + qu) + qux.transpose() * out.k[i];
    vxx = symmetrized(qxx + out.K[i].transpose() * quu * out.K[i] +
                      out.K[i].transpose() * qux + qux.transpose() * out.K[i]);
  }
  out.expected_improvement = d1 + d2;
  out.ok = true;
  return out;
}

struct ForwardPassResult {
  std::vector<Vector> states;
  std::vector<Vector> actions;
  double total_reward = 0.0;
  bool ok = false;
};

/// Closed-loop rollout of the candidate policy at step length alpha. Any
/// numerical failure or non-finite quantity marks the pass as rejected.
inline ForwardPassResult forward_pass(const BeliefMdp& mdp, const std::vector<Vector>& xs_nom,
                                      const std::vector<Vector>& as_nom,
                                      const BackwardPassResult& bp, double alpha) {
  const int nsteps = static_cast<int>(as_nom.size());
  ForwardPassResult out;
  out.states.resize(nsteps + 1);
  out.actions.resize(nsteps);
  out.states[0] = xs_nom[0];
  try {
    for (int i = 0; i < nsteps; ++i) {
      out.actions[i] =
          as_nom[i] + alpha * bp.k[i] + bp.K[i] * (out.states[i] - xs_nom[i]);
      out.total_reward += mdp.reward(out.states[i], out.actions[i], i);
      out.states[i + 1] = mdp.step(out.states[i], out.actions[i]);
      if (!out.states[i + 1].allFinite()) return out;
    }
    out.total_reward += mdp.terminal_reward(out.states[nsteps]);
  } catch (const std::runtime_error&) {
    return out;
  } catch (const std::logic_error&) {
    return out;
  }
  out.ok = std::isfinite(out.total_reward);
  return out;
}

namespace detail {

inline double evaluate_trajectory(const BeliefMdp& mdp, const std::vector<Vector>& xs,
                                  const std::vector<Vector>& as) {
  double total = 0.0;
  for (size_t i = 0; i < as.size(); ++i) {
    total += mdp.reward(xs[i], as[i], static_cast<int>(i));
  }
  return total + mdp.terminal_reward(xs.back());
}

}  // namespace detail

inline DdpResult solve(const BeliefMdp& mdp, const Vector& x0,
                       const std::vector<Vector>& init_actions, const DdpOptions& opt = {}) {
  if (static_cast<int>(init_actions.size()) != mdp.horizon) {
    throw ContractError("solve: action sequence length differs from the horizon");
  }
  if (x0.size() != mdp.state_dim) {
    throw ContractError("solve: initial state vector has the wrong dimension");
  }

  DdpResult res;
  res.actions = init_actions;
  res.states.resize(mdp.horizon + 1);
  res.states[0] = x0;
  for (int i = 0; i < mdp.horizon; ++i) {
    res.states[i + 1] = mdp.step(res.states[i], res.actions[i]);
    if (!res.states[i + 1].allFinite()) {
      throw NumericalError("solve: initial action sequence produces a non-finite belief");
    }
  }
  res.total_reward = detail::evaluate_trajectory(mdp, res.states, res.actions);
  res.reward_log.push_back(res.total_reward);

  double reg = opt.reg_init;
  int streak = 0;
  bool derivs_valid = false;
  detail::TrajectoryDerivs derivs;
  BackwardPassResult bp;

  while (res.iterations < opt.max_iterations && !res.converged) {
    ++res.iterations;
    DdpIterationInfo info;
    info.iteration = res.iterations;
    info.regularization = reg;
    if (!derivs_valid) {
      derivs = detail::trajectory_derivatives(mdp, res.states, res.actions, opt);
      derivs_valid = true;
    }
    bp = backward_pass(derivs, reg);
    info.backward_ok = bp.ok;
    info.expected_improvement = bp.expected_improvement;
    info.qu_max = bp.qu_max;
    info.total_reward = res.total_reward;
    if (!bp.ok) {
      if (opt.on_iteration) opt.on_iteration(info);
      if (reg >= opt.reg_max) break;
      reg = std::min(reg * opt.reg_increase, opt.reg_max);
      streak = 0;
      continue;
    }

    const double scale = std::max(1.0, std::abs(res.total_reward));
    // In the clean Newton region a model-predicted gain below tolerance means
    // there is nothing left to recover; skip the line search.
    if (reg <= opt.reg_min && bp.expected_improvement < opt.convergence_tol * scale) {
      if (++streak >= opt.converged_iterations) res.converged = true;
      if (opt.on_iteration) opt.on_iteration(info);
      continue;
    }

    bool accepted = false;
    for (double alpha = 1.0; alpha >= opt.line_search_floor; alpha *= 0.5) {
      const ForwardPassResult fp = forward_pass(mdp, res.states, res.actions, bp, alpha);
      if (!fp.ok || fp.total_reward < res.total_reward) continue;
      const double rel = (fp.total_reward - res.total_reward) / scale;
      res.states = fp.states;
      res.actions = fp.actions;
      res.total_reward = fp.total_reward;
      res.reward_log.push_back(res.total_reward);
      derivs_valid = false;
      streak = rel < opt.convergence_tol ? streak + 1 : 0;
      if (streak >= opt.converged_iterations) res.converged = true;
      accepted = true;
      info.alpha = alpha;
      break;
    }
    info.accepted = accepted;
    info.total_reward = res.total_reward;
    if (opt.on_iteration) opt.on_iteration(info);
    if (accepted) {
      reg = std::max(reg * opt.reg_decrease, opt.reg_min);
    } else {
      if (reg >= opt.reg_max) break;
      reg = std::min(reg * opt.reg_increase, opt.reg_max);
      streak = 0;
    }
  }

  // Reported gains come from a backward pass on the final trajectory.
  if (!derivs_valid) {
    derivs = detail::trajectory_derivatives(mdp, res.states, res.actions, opt);
  }
  bp = backward_pass(derivs, reg);
  while (!bp.ok && reg < opt.reg_max) {
    reg = std::min(reg * opt.reg_increase, opt.reg_max);
    bp = backward_pass(derivs, reg);
  }
  if (!bp.ok) throw NumericalError("solve: no negative definite backward pass at the solution");
  res.gains = bp.K;
  res.feedforward = bp.k;
  res.grad_norm = bp.qu_max;
  res.final_regularization = reg;
  return res;
}

/// Solves a sequence of progressively harder problems, warm starting each
/// stage with the previous stage's actions. All stages must share the action
/// dimension and horizon.
inline std::vector<DdpResult> continuation_solve(const std::vector<BeliefMdp>& stages,
                                                 const Vector& x0,
                                                 const std::vector<Vector>& init_actions,
                                                 const DdpOptions& opt = {}) {
  if (stages.empty()) throw ContractError("continuation_solve: no stages");
  std::vector<DdpResult> results;
  results.reserve(stages.size());
  std::vector<Vector> actions = init_actions;
  for (const BeliefMdp& mdp : stages) {
    results.push_back(solve(mdp, x0, actions, opt));
    actions = results.back().actions;
  }
  return results;
}

}  // namespace bddp
