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

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <variant>

namespace bddp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when inputs violate an operation's contract (dimension mismatch,
/// invalid parameter, index out of range).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure fails beyond repair (non-finite values,
/// PSD repair exceeding tolerance, singular systems past the regularization
/// floor, vanishing constraint gradients).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero. Input is symmetrized first.
inline Matrix clip_psd(const Matrix& m) {
  const Matrix s = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("clip_psd: eigendecomposition failed");
  }
  const Vector lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

/// Gaussian over an n-dimensional state: mean and covariance.
struct GaussianBelief {
  Vector mean;
  Matrix cov;

  GaussianBelief() = default;
  GaussianBelief(Vector m, Matrix c) : mean(std::move(m)), cov(std::move(c)) {}

  int dim() const { return static_cast<int>(mean.size()); }

  static GaussianBelief dirac(const Vector& mean) {
    return GaussianBelief(mean, Matrix::Zero(mean.size(), mean.size()));
  }
};

/// Validates the GaussianBelief invariants: square symmetric covariance with
/// smallest eigenvalue >= -1e-8 * trace / n. Throws on violation.
inline void check_gaussian(const GaussianBelief& b) {
  const int n = b.dim();
  if (b.cov.rows() != n || b.cov.cols() != n) {
    throw ContractError("GaussianBelief: covariance shape does not match mean");
  }
  if (!b.mean.allFinite() || !b.cov.allFinite()) {
    throw NumericalError("GaussianBelief: non-finite entries");
  }
  if (!is_symmetric(b.cov)) {
    throw NumericalError("GaussianBelief: covariance not symmetric");
  }
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b.cov);
    const double min_eig = eig.eigenvalues().minCoeff();
    const double floor = -1e-8 * std::max(b.cov.trace(), 0.0) / n - 1e-300;
    if (min_eig < floor) {
      throw NumericalError("GaussianBelief: covariance not PSD (min eigenvalue " +
                           std::to_string(min_eig) + ")");
    }
  }
}

/// Two-Gaussian mixture for belief under one unilateral constraint:
/// `free` carries the mass in the feasible volume, `surface` the mass
/// aggregated on the constraint manifold (degenerate along the normal),
/// `weight` the mass of the free component.
struct ConstrainedBelief {
  GaussianBelief free;
  GaussianBelief surface;
  double weight = 1.0;

  int dim() const { return free.dim(); }
};

inline void check_constrained(const ConstrainedBelief& b) {
  check_gaussian(b.free);
  check_gaussian(b.surface);
  if (b.free.dim() != b.surface.dim()) {
    throw ContractError("ConstrainedBelief: component dimensions differ");
  }
  if (!(b.weight >= 0.0 && b.weight <= 1.0)) {
    throw ContractError("ConstrainedBelief: weight outside [0, 1]");
  }
}

using Belief = std::variant<GaussianBelief, ConstrainedBelief>;

inline int belief_dim(const Belief& b) {
  return std::visit([](const auto& v) { return v.dim(); }, b);
}

}  // namespace bddp
