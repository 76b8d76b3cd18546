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
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bddp/constrained.hpp"
#include "bddp/domain_spec.hpp"
#include "bddp/ekf.hpp"
#include "bddp/layout.hpp"
#include "bddp/numdiff.hpp"

namespace bddp {

/// Expectation of a state function under a Gaussian via 2n+1 symmetric
/// cubature points (unscented transform with kappa = 1). Exact for cubic
/// polynomials, hence exact for the quadratic rewards used here. Diagonal
/// covariances take a cheap square-root path; anything else goes through an
/// eigendecomposition so rank-deficient covariances need no special casing.
template <typename F>
double belief_expectation(const GaussianBelief& b, F&& fn) {
  const int n = b.dim();
  const double kappa = 1.0;
  const double scale = std::sqrt(static_cast<double>(n) + kappa);
  const double w_center = kappa / (n + kappa);
  const double w_point = 0.5 / (n + kappa);

  Matrix root;
  if (b.cov.isDiagonal(0.0)) {
    root = b.cov.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b.cov);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("belief_expectation: eigendecomposition failed");
    }
    root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  double acc = w_center * fn(b.mean);
  for (int i = 0; i < n; ++i) {
    const Vector d = scale * root.col(i);
    acc += w_point * (fn(b.mean + d) + fn(b.mean - d));
  }
  return acc;
}

inline double belief_reward(const GaussianBelief& b,
                            const std::function<double(const Vector&)>& fn) {
  return belief_expectation(b, fn);
}

/// Mixture expectation: weight-averaged component expectations.
inline double belief_reward(const ConstrainedBelief& cb,
                            const std::function<double(const Vector&)>& fn) {
  double acc = 0.0;
  if (cb.weight > 0.0) acc += cb.weight * belief_expectation(cb.free, fn);
  if (cb.weight < 1.0) acc += (1.0 - cb.weight) * belief_expectation(cb.surface, fn);
  return acc;
}

inline double belief_reward(const Belief& b, const std::function<double(const Vector&)>& fn) {
  return std::visit([&](const auto& bb) { return belief_reward(bb, fn); }, b);
}

struct StepDerivatives {
  Matrix fx;
  Matrix fu;
  // Optional second-order dynamics: per-output Hessians over the joint
  // (x, a) vector. Empty means linear (or the caller settles for Gauss-Newton).
  std::vector<Matrix> f_hess;
};

struct StageDerivatives {
  Vector rx;
  Vector ru;
  Matrix rxx;
  Matrix ruu;
  Matrix rux;
};

struct TerminalDerivatives {
  Vector rx;
  Matrix rxx;
};

/// Deterministic MDP over vectorized beliefs. `step` is the marginalized
/// (observation-averaged) belief update, so trajectories depend only on the
/// initial belief and the action sequence. The derivative hooks are optional;
/// the planner falls back to finite differences when they are absent.
struct BeliefMdp {
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 0;
  // Present when the MDP state is a vectorized belief; absent for plain
  // state-space test problems.
  std::optional<BeliefLayout> layout;
  std::function<Vector(const Vector&, const Vector&)> step;
  std::function<double(const Vector&, const Vector&, int)> reward;
  std::function<double(const Vector&)> terminal_reward;
  std::function<StepDerivatives(const Vector&, const Vector&)> step_derivatives;
  std::function<StageDerivatives(const Vector&, const Vector&, int)> reward_derivatives;
  std::function<TerminalDerivatives(const Vector&)> terminal_derivatives;
};

/// Wires a domain into the vectorized belief MDP: decode, propagate one
/// control period through the marginalized filter (with the constraint stage
/// when the domain has one), re-encode. When the domain declares the
/// state/action reward split, the cross second derivatives vanish and the
/// action blocks are closed-form, which finite differencing exploits.
inline BeliefMdp make_belief_mdp(const DomainSpec& domain, double fd_step = 1e-5,
                                 double fd_step_hessian = 1e-3) {
  if (domain.layout.constrained && !domain.constraint.has_value()) {
    throw ContractError("make_belief_mdp: constrained layout without a constraint model");
  }
  BeliefMdp mdp;
  mdp.layout = domain.layout;
  mdp.state_dim = domain.layout.dim();
  mdp.action_dim = domain.action_dim;
  mdp.horizon = domain.horizon;

  const BeliefLayout layout = domain.layout;
  const DynamicsModel dyn = domain.dynamics;
  const ObservationModel obs = domain.observation;

  if (layout.constrained) {
    const ConstraintModel cm = *domain.constraint;
    mdp.step = [layout, dyn, obs, cm](const Vector& x, const Vector& a) {
      const ConstrainedBelief cb = devectorize_constrained(x, layout);
      return vectorize(constrained_update(cb, a, dyn, obs, cm), layout);
    };
  } else {
    mdp.step = [layout, dyn, obs](const Vector& x, const Vector& a) {
      const GaussianBelief b = devectorize_gaussian(x, layout);
      return vectorize(marginalized_update(b, a, dyn, obs), layout);
    };
  }

  const auto running = domain.running_reward;
  mdp.reward = [layout, running](const Vector& x, const Vector& a, int i) {
    const Belief b = devectorize(x, layout);
    return belief_reward(b, [&](const Vector& s) { return running(s, a, i); });
  };
  const auto terminal = domain.terminal_reward;
  mdp.terminal_reward = [layout, terminal](const Vector& x) {
    const Belief b = devectorize(x, layout);
    return belief_reward(b, terminal);
  };

  if (domain.state_running_reward) {
    const auto state_part = domain.state_running_reward;
    const Matrix r_cost = domain.action_cost;
    if (r_cost.rows() != domain.action_dim || r_cost.cols() != domain.action_dim) {
      throw ContractError("make_belief_mdp: action cost matrix has the wrong shape");
    }
    mdp.reward_derivatives = [layout, state_part, r_cost, fd_step, fd_step_hessian](
                                 const Vector& x, const Vector& a, int) {
      const auto state_expectation = [&](const Vector& xv) {
        const Belief b = devectorize(xv, layout);
        return belief_reward(b, state_part);
      };
      StageDerivatives d;
      d.rx = gradient_fd(state_expectation, x, fd_step);
      d.rxx = hessian_fd(state_expectation, x, fd_step_hessian);
      const Matrix r_sym = r_cost + r_cost.transpose();
      d.ru = -r_sym * a;
      d.ruu = -r_sym;
      d.rux = Matrix::Zero(a.size(), x.size());
      return d;
    };
  }
  return mdp;
}

}  // namespace bddp
