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
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bddp/constrained.hpp"
#include "bddp/ddp.hpp"
#include "bddp/domain_spec.hpp"

namespace bddp {

/// Locally linear policy read off a solved trajectory. Actions are the
/// nominal ones corrected by feedback on the deviation of the current
/// vectorized belief from the nominal one.
struct LinearPolicy {
  std::vector<Vector> nominal_states;
  std::vector<Vector> nominal_actions;
  std::vector<Matrix> gains;

  int horizon() const { return static_cast<int>(nominal_actions.size()); }

  static LinearPolicy from_result(const DdpResult& res) {
    return LinearPolicy{res.states, res.actions, res.gains};
  }
};

inline Vector policy_action(const LinearPolicy& policy, const Vector& belief_vec, int step) {
  if (step < 0 || step >= policy.horizon()) {
    throw ContractError("policy_action: step outside the policy horizon");
  }
  if (belief_vec.size() != policy.nominal_states[step].size()) {
    throw ContractError("policy_action: belief vector dimension mismatch");
  }
  return policy.nominal_actions[step] +
         policy.gains[step] * (belief_vec - policy.nominal_states[step]);
}

struct RolloutOptions {
  // When set, overrides the sampled (or spec) ground-truth start state.
  std::optional<Vector> initial_state;
  bool sample_initial_state = true;
  // Suppresses process and observation noise draws (replay of the nominal).
  bool noise_free = false;
  // Newton iterations used to push a penetrating state back to the surface.
  int projection_iters = 8;
};

struct RolloutRecord {
  std::uint64_t seed = 0;
  std::vector<Vector> states;        // ground truth, steps_completed + 1
  std::vector<Vector> actions;       // steps_completed
  std::vector<Vector> observations;  // steps_completed
  std::vector<Vector> beliefs;       // vectorized estimator beliefs
  double realized_reward = 0.0;
  int steps_completed = 0;
  bool estimator_failed = false;
};

namespace detail {

// Deterministic square root that tolerates rank-deficient covariances.
inline Matrix cov_sqrt(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("cov_sqrt: eigendecomposition failed");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline Vector standard_normal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Vector sample_gaussian(const GaussianBelief& b, std::mt19937_64& rng) {
  return b.mean + cov_sqrt(b.cov) * standard_normal(b.dim(), rng);
}

// Moves a penetrating state back to the constraint surface along the local
// normal, removing the normal motion and keeping the tangential part.
inline Vector project_state(Vector s, const ConstraintModel& cm, int iters) {
  for (int it = 0; it < iters; ++it) {
    const double gamma = cm.distance(s);
    if (gamma >= 0.0) break;
    const Vector grad = cm.gradient_at(s);
    const double sq = grad.squaredNorm();
    if (!(sq > kMinConstraintGradNorm * kMinConstraintGradNorm)) break;
    s -= grad * (gamma / sq);
  }
  return s;
}

inline Vector sample_initial(const DomainSpec& domain, std::mt19937_64& rng) {
  if (const auto* g = std::get_if<GaussianBelief>(&domain.initial_belief)) {
    return sample_gaussian(*g, rng);
  }
  const auto& cb = std::get<ConstrainedBelief>(domain.initial_belief);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector s = unit(rng) < cb.weight ? sample_gaussian(cb.free, rng)
                                   : sample_gaussian(cb.surface, rng);
  if (domain.constraint && domain.constraint->distance(s) < 0.0) {
    s = project_state(s, *domain.constraint, 8);
  }
  return s;
}

}  // namespace detail

/// Simulates one closed-loop run: ground truth evolves under the stochastic
/// dynamics (clamped to the constraint surface when it would penetrate), the
/// estimator tracks the sampled observations, and the policy acts on the
/// vectorized estimate. The record is truncated at the first estimator
/// failure. A fixed seed fixes every sampled quantity.
inline RolloutRecord rollout(const DomainSpec& domain, const LinearPolicy& policy,
                             std::uint64_t seed, const RolloutOptions& opt = {}) {
  if (policy.horizon() != domain.horizon) {
    throw ContractError("rollout: policy horizon differs from the domain horizon");
  }

  std::mt19937_64 master(seed);
  std::mt19937_64 init_rng(master());
  std::mt19937_64 process_rng(master());
  std::mt19937_64 obs_rng(master());

  RolloutRecord rec;
  rec.seed = seed;

  Vector s;
  if (opt.initial_state) {
    s = *opt.initial_state;
  } else if (opt.sample_initial_state && !opt.noise_free) {
    s = detail::sample_initial(domain, init_rng);
  } else {
    s = domain.initial_state;
  }
  if (domain.constraint && domain.constraint->distance(s) < 0.0) {
    s = detail::project_state(s, *domain.constraint, opt.projection_iters);
  }

  Vector x = vectorize(domain.initial_belief, domain.layout);
  Belief belief = devectorize(x, domain.layout);
  rec.states.push_back(s);
  rec.beliefs.push_back(x);

  const DynamicsModel& dyn = domain.dynamics;
  const ObservationModel& obs = domain.observation;
  const double sqrt_tau = std::sqrt(dyn.tau);

  for (int i = 0; i < domain.horizon; ++i) {
    const Vector a = policy_action(policy, x, i);
    rec.realized_reward += domain.running_reward(s, a, i);

    Vector s_next = euler_step(s, a, dyn);
    if (!opt.noise_free) {
      const Matrix g = dyn.noise(s, a);
      s_next += sqrt_tau * (g * detail::standard_normal(static_cast<int>(g.cols()),
                                                        process_rng));
    }
    if (domain.constraint && domain.constraint->distance(s_next) < 0.0) {
      s_next = detail::project_state(s_next, *domain.constraint, opt.projection_iters);
    }
    Vector z = obs.mean(s_next);
    if (!opt.noise_free) {
      z += detail::cov_sqrt(obs.noise_cov(s_next, a)) *
           detail::standard_normal(static_cast<int>(z.size()), obs_rng);
    }

    try {
      if (const auto* g = std::get_if<GaussianBelief>(&belief)) {
        belief = ekf_correct(*g, a, z, dyn, obs);
      } else {
        belief = constrained_correct(std::get<ConstrainedBelief>(belief), a, z, dyn, obs,
                                     *domain.constraint);
      }
      x = vectorize(belief, domain.layout);
      if (!x.allFinite()) throw NumericalError("rollout: non-finite belief");
      belief = devectorize(x, domain.layout);
    } catch (const std::runtime_error&) {
      rec.estimator_failed = true;
      break;
    }

    s = s_next;
    rec.actions.push_back(a);
    rec.observations.push_back(z);
    rec.states.push_back(s);
    rec.beliefs.push_back(x);
    ++rec.steps_completed;
  }
  if (!rec.estimator_failed) {
    rec.realized_reward += domain.terminal_reward(s);
  }
  return rec;
}

}  // namespace bddp
