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
#include <optional>

#include "bddp/ekf.hpp"
#include "bddp/models.hpp"
#include "bddp/truncated_normal.hpp"

namespace bddp {

// Truncation sides with total mass below this are treated as empty and
// replaced by a zero-weight boundary point, avoiding 0/0 moment ratios.
inline constexpr double kEmptySideMass = 1e-12;
inline constexpr double kMinConstraintGradNorm = 1e-8;

/// Orthogonal frame adapted to the linearized constraint at a point: row
/// `k_axis` of `rotation` is the unit constraint normal, and `offset` is the
/// signed distance of the expansion point from the linearized manifold
/// (positive on the feasible side).
struct ConstraintFrame {
  Matrix rotation;
  int k_axis = 0;
  double offset = 0.0;
};

inline ConstraintFrame constraint_frame(const GaussianBelief& b, const ConstraintModel& cm) {
  const int n = b.dim();
  const Vector grad = cm.gradient_at(b.mean);
  const double norm = grad.norm();
  if (!(norm > kMinConstraintGradNorm)) {
    throw NumericalError("constraint_frame: vanishing constraint gradient");
  }
  const Vector u = grad / norm;

  ConstraintFrame frame;
  int k = 0;
  u.cwiseAbs().maxCoeff(&k);
  frame.k_axis = k;
  // Householder reflection sending e_k to -sign(u_k) u; flipping row k then
  // makes that row exactly u^T.
  const double sign = u[k] >= 0.0 ? 1.0 : -1.0;
  Vector v = u;
  v[k] += sign;
  frame.rotation = Matrix::Identity(n, n) - (2.0 / v.squaredNorm()) * (v * v.transpose());
  frame.rotation.row(k) *= -sign;
  frame.offset = cm.distance(b.mean) / norm;
  return frame;
}

/// The two halves of a Gaussian split across the linearized constraint:
/// `upper` holds the feasible-side moments, `lower` the infeasible-side
/// moments (before any projection), `mass_upper` the feasible probability.
struct TruncationResult {
  GaussianBelief upper;
  GaussianBelief lower;
  double mass_upper = 1.0;
};

/// Moves the mean onto the linearized manifold along the constraint normal
/// and zeroes the covariance in that direction; tangential moments are
/// untouched.
inline GaussianBelief project_to_manifold(const GaussianBelief& b, const ConstraintModel& cm) {
  const int n = b.dim();
  const Vector grad = cm.gradient_at(b.mean);
  const double norm = grad.norm();
  if (!(norm > kMinConstraintGradNorm)) {
    throw NumericalError("project_to_manifold: vanishing constraint gradient");
  }
  const Vector u = grad / norm;
  GaussianBelief out;
  out.mean = b.mean - u * (cm.distance(b.mean) / norm);
  const Matrix tangent = Matrix::Identity(n, n) - u * u.transpose();
  out.cov = symmetrized(tangent * b.cov * tangent.transpose());
  return out;
}

namespace detail {

// Conditional moments of the full Gaussian given the 1-D truncation along the
// frame's normal axis: the regression of all coordinates on the normal
// coordinate carries the truncated mean shift and variance change.
inline GaussianBelief condition_on_axis(const Vector& mean_rot, const Matrix& cov_rot, int k,
                                        const Moments1d& m, const Matrix& rot) {
  const double var_k = cov_rot(k, k);
  Vector mean = mean_rot;
  Matrix cov = cov_rot;
  if (var_k > 0.0) {
    const Vector col = cov_rot.col(k);
    mean += col * ((m.mean - mean_rot[k]) / var_k);
    cov += (col * col.transpose()) * ((m.var - var_k) / (var_k * var_k));
  }
  GaussianBelief out;
  out.mean = rot.transpose() * mean;
  out.cov = symmetrized(rot.transpose() * cov * rot);
  return out;
}

inline GaussianBelief boundary_point(const Vector& near_mean, int n, const ConstraintModel& cm) {
  GaussianBelief point(near_mean, Matrix::Zero(n, n));
  return project_to_manifold(point, cm);
}

}  // namespace detail

/// Splits a Gaussian across the constraint linearized at its mean. The 1-D
/// marginal along the constraint normal is truncated on each side and the
/// remaining directions follow through exact conditional-Gaussian regression.
/// An empty side is returned as a boundary point with zero mass.
inline TruncationResult truncate_gaussian(const GaussianBelief& b, const ConstraintModel& cm) {
  const int n = b.dim();
  const ConstraintFrame frame = constraint_frame(b, cm);
  const int k = frame.k_axis;
  const Vector mean_rot = frame.rotation * b.mean;
  const Matrix cov_rot = symmetrized(frame.rotation * b.cov * frame.rotation.transpose());
  const double sigma = std::sqrt(std::max(cov_rot(k, k), 0.0));
  const double bound = mean_rot[k] - frame.offset;

  const auto upper = truncated_moments_1d(mean_rot[k], sigma, TruncationSide::kAbove, bound);
  const auto lower = truncated_moments_1d(mean_rot[k], sigma, TruncationSide::kBelow, bound);

  TruncationResult out;
  double mass = upper ? upper->mass : 0.0;
  if (upper && upper->mass >= kEmptySideMass) {
    out.upper = detail::condition_on_axis(mean_rot, cov_rot, k, *upper, frame.rotation);
  } else {
    out.upper = detail::boundary_point(b.mean, n, cm);
    mass = 0.0;
  }
  if (lower && lower->mass >= kEmptySideMass) {
    out.lower = detail::condition_on_axis(mean_rot, cov_rot, k, *lower, frame.rotation);
  } else {
    // Both sides cannot be empty: the side masses sum to one.
    out.lower = detail::boundary_point(b.mean, n, cm);
    mass = 1.0;
  }
  out.mass_upper = std::clamp(mass, 0.0, 1.0);
  return out;
}

/// Moment-matched single Gaussian of the two-component mixture
/// {a with weight alpha, b with weight 1 - alpha}.
inline GaussianBelief reduce_pair(const GaussianBelief& a, const GaussianBelief& b, double alpha) {
  if (a.dim() != b.dim()) throw ContractError("reduce_pair: dimension mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("reduce_pair: alpha outside [0, 1]");
  if (alpha == 1.0) return a;
  if (alpha == 0.0) return b;
  GaussianBelief out;
  out.mean = alpha * a.mean + (1.0 - alpha) * b.mean;
  const Vector d = a.mean - b.mean;
  out.cov = symmetrized(alpha * a.cov + (1.0 - alpha) * b.cov +
                        alpha * (1.0 - alpha) * (d * d.transpose()));
  return out;
}

namespace detail {

// Post-filter stage shared by the planning and execution variants: per-
// component truncation, cross-component reduction of the feasible and
// infeasible halves, projection of the on-manifold component, weight update.
inline ConstrainedBelief remix_constrained(const GaussianBelief& free_upd,
                                           const GaussianBelief& surf_upd, double alpha,
                                           const ConstraintModel& cm) {
  const TruncationResult t1 = truncate_gaussian(free_upd, cm);
  const TruncationResult t2 = truncate_gaussian(surf_upd, cm);

  const double up1 = alpha * t1.mass_upper;
  const double up2 = (1.0 - alpha) * t2.mass_upper;
  const double lo1 = alpha * (1.0 - t1.mass_upper);
  const double lo2 = (1.0 - alpha) * (1.0 - t2.mass_upper);
  const double upper_mass = up1 + up2;
  const double lower_mass = lo1 + lo2;

  ConstrainedBelief out;
  out.weight = std::clamp(upper_mass, 0.0, 1.0);
  if (upper_mass >= kEmptySideMass) {
    out.free = reduce_pair(t1.upper, t2.upper, up1 / upper_mass);
  } else {
    out.free = boundary_point(free_upd.mean, free_upd.dim(), cm);
    out.weight = 0.0;
  }
  if (lower_mass >= kEmptySideMass) {
    out.surface = project_to_manifold(reduce_pair(t1.lower, t2.lower, lo1 / lower_mass), cm);
  } else {
    out.surface = boundary_point(surf_upd.mean, surf_upd.dim(), cm);
    out.weight = 1.0;
  }
  return out;
}

}  // namespace detail

/// Deterministic belief update under one unilateral constraint: marginalized
/// EKF per component, truncation across the constraint, reduction back to the
/// two-component form, projection of the on-manifold component, and the
/// feasible-mass weight update.
inline ConstrainedBelief constrained_update(const ConstrainedBelief& cb, const Vector& a,
                                            const DynamicsModel& dyn, const ObservationModel& obs,
                                            const ConstraintModel& cm) {
  const GaussianBelief free_upd = marginalized_update(cb.free, a, dyn, obs);
  const GaussianBelief surf_upd = marginalized_update(cb.surface, a, dyn, obs);
  return detail::remix_constrained(free_upd, surf_upd, cb.weight, cm);
}

/// Execution-time analogue of constrained_update: each component is corrected
/// with the actual observation before the truncation/reduction stage.
inline ConstrainedBelief constrained_correct(const ConstrainedBelief& cb, const Vector& a,
                                             const Vector& z, const DynamicsModel& dyn,
                                             const ObservationModel& obs,
                                             const ConstraintModel& cm) {
  const GaussianBelief free_upd = ekf_correct(cb.free, a, z, dyn, obs);
  const GaussianBelief surf_upd = ekf_correct(cb.surface, a, z, dyn, obs);
  return detail::remix_constrained(free_upd, surf_upd, cb.weight, cm);
}

}  // namespace bddp
