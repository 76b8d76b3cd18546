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

#include <optional>

#include "bddp/models.hpp"
#include "bddp/numdiff.hpp"

namespace bddp {

/// One Euler step of the drift: s + tau * f(s, a).
inline Vector euler_step(const Vector& s, const Vector& a, const DynamicsModel& dyn) {
  const Vector fs = dyn.drift(s, a);
  if (!fs.allFinite()) throw NumericalError("euler_step: non-finite drift");
  return s + dyn.tau * fs;
}

struct StateJacobians {
  Matrix f_s;  // n x n, d(euler_step)/ds
  Matrix w_s;  // p x n, d(obs mean)/ds
};

/// Jacobians of the discrete transition mean and the observation mean at
/// (s, a). Uses analytic Jacobians when the models supply them, central
/// finite differences otherwise.
inline StateJacobians jacobians(const Vector& s, const Vector& a, const DynamicsModel& dyn,
                                const ObservationModel& obs) {
  StateJacobians out;
  const int n = static_cast<int>(s.size());
  if (dyn.drift_jacobian) {
    out.f_s = Matrix::Identity(n, n) + dyn.tau * dyn.drift_jacobian(s, a);
  } else {
    out.f_s = Matrix::Identity(n, n) +
              dyn.tau * jacobian_fd([&](const Vector& x) { return dyn.drift(x, a); }, s);
  }
  if (obs.mean_jacobian) {
    out.w_s = obs.mean_jacobian(s);
  } else {
    out.w_s = jacobian_fd([&](const Vector& x) { return obs.mean(x); }, s);
  }
  if (!out.f_s.allFinite() || !out.w_s.allFinite()) {
    throw NumericalError("jacobians: non-finite derivative estimate");
  }
  return out;
}

struct Prediction {
  Vector mean;  // euler_step(b.mean, a)
  Matrix cov;   // H = F_s Sigma F_s^T + Q
};

/// Uncorrected one-step propagation of the belief.
inline Prediction ekf_predict(const GaussianBelief& b, const Vector& a, const DynamicsModel& dyn,
                              const ObservationModel& obs) {
  const StateJacobians jac = jacobians(b.mean, a, dyn, obs);
  Prediction p;
  p.mean = euler_step(b.mean, a, dyn);
  p.cov = symmetrized(jac.f_s * b.cov * jac.f_s.transpose() + dyn.process_cov(b.mean, a));
  if (!p.cov.allFinite()) throw NumericalError("ekf_predict: non-finite covariance");
  return p;
}

namespace detail {

// Shared measurement update. With no observation the innovation term is
// dropped, which is the marginalized (deterministic) update: the mean update
// is linear in z, so its expectation at z = w(mean_pred) leaves the predicted
// mean, and the covariance never depends on z.
inline GaussianBelief ekf_update_impl(const GaussianBelief& b, const Vector& a,
                                      const std::optional<Vector>& z, const DynamicsModel& dyn,
                                      const ObservationModel& obs) {
  const int n = b.dim();
  const StateJacobians jac = jacobians(b.mean, a, dyn, obs);
  if (z && z->size() != jac.w_s.rows()) {
    throw ContractError("ekf update: observation dimension mismatch");
  }
  const Vector mean_pred = euler_step(b.mean, a, dyn);
  const Matrix big_h =
      symmetrized(jac.f_s * b.cov * jac.f_s.transpose() + dyn.process_cov(b.mean, a));

  const Matrix w_noise = obs.noise_cov(b.mean, a);
  Matrix innov_cov = symmetrized(jac.w_s * big_h * jac.w_s.transpose() + w_noise);
  const int p = static_cast<int>(innov_cov.rows());

  Eigen::LDLT<Matrix> ldlt(innov_cov);
  bool degenerate = ldlt.info() != Eigen::Success || !ldlt.isPositive();
  if (!degenerate) {
    // Near-zero pivots make the solve unusable even when LDLT "succeeds".
    const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
    const double dmin = ldlt.vectorD().minCoeff();
    degenerate = !(dmin > dmax * 1e-14);
  }
  if (degenerate) {
    const double lambda = 1e-9 * innov_cov.trace() + 1e-300;
    innov_cov += lambda * Matrix::Identity(p, p);
    ldlt.compute(innov_cov);
    if (ldlt.info() != Eigen::Success) {
      throw NumericalError("ekf update: innovation covariance singular beyond regularization");
    }
  }

  // K = H w_s^T S^{-1}, computed as a solve against S.
  const Matrix gain = ldlt.solve(jac.w_s * big_h).transpose();

  GaussianBelief out;
  out.mean = z ? Vector(mean_pred + gain * (*z - obs.mean(mean_pred))) : mean_pred;
  out.cov = symmetrized(big_h - gain * jac.w_s * big_h);
  if (!out.mean.allFinite() || !out.cov.allFinite()) {
    throw NumericalError("ekf update: non-finite result");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.cov);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < 0.0) {
    const double scale = std::max(out.cov.trace() / n, 1e-300);
    if (min_eig < -1e-6 * scale) {
      throw NumericalError("ekf update: covariance repair exceeds tolerance");
    }
    out.cov = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
              eig.eigenvectors().transpose();
    out.cov = symmetrized(out.cov);
  }
  return out;
}

}  // namespace detail

/// Stochastic measurement update with observation z (execution-time filter).
inline GaussianBelief ekf_correct(const GaussianBelief& b, const Vector& a, const Vector& z,
                                  const DynamicsModel& dyn, const ObservationModel& obs) {
  if (!z.allFinite()) throw NumericalError("ekf_correct: non-finite observation");
  return detail::ekf_update_impl(b, a, z, dyn, obs);
}

/// Deterministic belief update: predicted mean plus the observation-
/// marginalized covariance. Equals ekf_correct evaluated at the predicted
/// mean observation.
inline GaussianBelief marginalized_update(const GaussianBelief& b, const Vector& a,
                                          const DynamicsModel& dyn, const ObservationModel& obs) {
  return detail::ekf_update_impl(b, a, std::nullopt, dyn, obs);
}

}  // namespace bddp
