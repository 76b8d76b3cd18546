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

#include <functional>

#include "bddp/gaussian.hpp"
#include "bddp/numdiff.hpp"

namespace bddp {

/// Continuous-time stochastic dynamics ds = f(s,a) dt + g(s,a) dxi,
/// discretized over timestep tau. The one-step process-noise covariance is
/// Q(s,a) = tau * g * g^T.
struct DynamicsModel {
  std::function<Vector(const Vector& s, const Vector& a)> drift;  // f
  std::function<Matrix(const Vector& s, const Vector& a)> noise;  // g, n x k
  double tau = 0.0;
  // Optional analytic df/ds (n x n); finite-differenced when absent.
  std::function<Matrix(const Vector& s, const Vector& a)> drift_jacobian;

  Matrix process_cov(const Vector& s, const Vector& a) const {
    const Matrix g = noise(s, a);
    return tau * g * g.transpose();
  }
};

/// Observation z ~ N(w(s), W(s,a)).
struct ObservationModel {
  std::function<Vector(const Vector& s)> mean;                        // w
  std::function<Matrix(const Vector& s, const Vector& a)> noise_cov;  // W, p x p
  // Optional analytic dw/ds (p x n); finite-differenced when absent.
  std::function<Matrix(const Vector& s)> mean_jacobian;
};

/// One scalar unilateral constraint: distance(s) >= 0 is the feasible region,
/// distance(s) = 0 the constraint manifold.
struct ConstraintModel {
  std::function<double(const Vector& s)> distance;  // Gamma
  // Optional analytic dGamma/ds; finite-differenced when absent.
  std::function<Vector(const Vector& s)> gradient;

  Vector gradient_at(const Vector& s, double h0 = 1e-5) const {
    if (gradient) return gradient(s);
    Vector g(s.size());
    Vector xt = s;
    for (int i = 0; i < s.size(); ++i) {
      const double h = fd_step(s[i], h0);
      xt[i] = s[i] + h;
      const double fp = distance(xt);
      xt[i] = s[i] - h;
      const double fm = distance(xt);
      xt[i] = s[i];
      g[i] = (fp - fm) / (2.0 * h);
    }
    if (!g.allFinite()) throw NumericalError("ConstraintModel: non-finite gradient");
    return g;
  }
};

}  // namespace bddp
